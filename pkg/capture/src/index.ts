export { capture, stepEntropy } from "./capture.js";
export { fullEntropy, pooledTailEntropy, topkLogprobs } from "./entropy.js";
export { loadQueries, parseCsv } from "./csv.js";
export { headerLine, traceLine } from "./jsonl.js";
export { MockBackend, MOCK_VOCAB } from "./mock.js";
export { HttpBackend } from "./http.js";
export { resolveBackend } from "./backend.js";
export { main } from "./cli.js";
export type * from "./types.js";
