/** Backend resolution from the --model identifier.
 *
 *   mock:<variant>           deterministic local stand-in (no GPU needed)
 *   http:<url>#<model>       logprob-exposing chat endpoint
 */

import { HttpBackend } from "./http.js";
import { FailingBackend, MockBackend } from "./mock.js";
import type { ModelBackend } from "./types.js";

export function resolveBackend(model: string, topk: number): ModelBackend {
  if (model === "mock:failing") return new FailingBackend();
  if (model.startsWith("mock:")) return new MockBackend(model.slice("mock:".length));
  if (model.startsWith("http:") || model.startsWith("https:")) {
    const [url, name] = model.split("#");
    return new HttpBackend(url, name ?? "default", topk);
  }
  throw new Error(`cannot load model ${model}: use mock:<variant> or http:<url>#<model>`);
}
