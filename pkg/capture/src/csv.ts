/** Minimal RFC-4180 reader for the queries CSV the engine ships. */

import { readFileSync } from "node:fs";
import type { QueryRow } from "./types.js";

export function parseCsv(text: string): string[][] {
  const rows: string[][] = [];
  let row: string[] = [];
  let cell = "";
  let quoted = false;
  let i = 0;
  while (i < text.length) {
    const ch = text[i];
    if (quoted) {
      if (ch === '"') {
        if (text[i + 1] === '"') {
          cell += '"';
          i += 2;
          continue;
        }
        quoted = false;
        i += 1;
        continue;
      }
      cell += ch;
      i += 1;
      continue;
    }
    if (ch === '"') {
      quoted = true;
      i += 1;
      continue;
    }
    if (ch === ",") {
      row.push(cell);
      cell = "";
      i += 1;
      continue;
    }
    if (ch === "\n" || ch === "\r") {
      if (ch === "\r" && text[i + 1] === "\n") i += 1;
      row.push(cell);
      rows.push(row);
      row = [];
      cell = "";
      i += 1;
      continue;
    }
    cell += ch;
    i += 1;
  }
  if (cell.length > 0 || row.length > 0) {
    row.push(cell);
    rows.push(row);
  }
  return rows.filter((r) => !(r.length === 1 && r[0] === ""));
}

const HEADER = ["query_id", "text", "category", "truth_status", "expected_answers"];

export function loadQueries(path: string): QueryRow[] {
  const rows = parseCsv(readFileSync(path, "utf-8"));
  if (rows.length === 0) throw new Error(`${path}: empty queries file`);
  const header = rows[0].map((h) => h.trim());
  if (header.join(",") !== HEADER.join(",")) {
    throw new Error(`${path}: bad header ${JSON.stringify(rows[0])}`);
  }
  return rows.slice(1).map((r, idx) => {
    if (r.length !== 5) throw new Error(`${path}: line ${idx + 2}: expected 5 fields, got ${r.length}`);
    return {
      queryId: r[0],
      text: r[1],
      category: r[2],
      truthStatus: r[3],
      expectedAnswers: r[4] ? r[4].split("|").filter((a) => a.length > 0) : [],
    };
  });
}
