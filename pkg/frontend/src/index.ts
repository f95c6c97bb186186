export { KernelClient, type KernelClientOptions } from "./client.js";
export {
  matrix,
  type AssignmentTarget,
  type LevelWeight,
  type Matrix,
  type PyramidSpec,
} from "./types.js";
