/**
 * Keyboard mapping: 1 = slot one, 2 = slot two, t = tie for pairwise tasks;
 * digits score direct tasks (0 means 10). Anything else is ignored.
 */

import { Judgment } from "./types.js";

export function keyToJudgment(key: string, mode: "pairwise" | "direct"): Judgment | null {
  if (mode === "pairwise") {
    if (key === "1") return { label: "A" };
    if (key === "2") return { label: "B" };
    if (key === "t" || key === "T") return { label: "tie" };
    return null;
  }
  if (/^[0-9]$/.test(key)) {
    return { score: key === "0" ? 10 : Number(key) };
  }
  return null;
}
