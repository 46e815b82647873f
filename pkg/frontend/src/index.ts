export * from "./types.js";
export * from "./viewModel.js";
export * from "./client.js";
export * from "./quickActions.js";
