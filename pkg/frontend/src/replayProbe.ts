/**
 * Probe replay: read a directory of masked probe payloads and emit one
 * attacker answer per probe as JSON-lines. The shipped attacker is the
 * seeded uniform stub; a real model-backed attacker would slot in behind
 * the same loop. Malformed probe files are skipped and logged to stderr.
 */
import * as fs from 'node:fs';
import * as path from 'node:path';
import { Rng } from './rng.js';

export interface ProbeAnswer {
  probe_id: string;
  ticker_top5: string[];
  date_guess: string;
  board_guess: string;
}

const BOARDS = ['MAIN', 'CHINEXT', 'STAR', 'BSE'];

export interface ReplayOptions {
  universe: string[];
  dateStart: string; // ISO
  dateEnd: string;   // ISO
  seed: number;
}

function isoDaysBetween(a: string, b: string): number {
  const start = Date.parse(a + 'T00:00:00Z');
  const end = Date.parse(b + 'T00:00:00Z');
  return Math.round((end - start) / 86_400_000);
}

function isoAddDays(a: string, days: number): string {
  const t = new Date(Date.parse(a + 'T00:00:00Z') + days * 86_400_000);
  return t.toISOString().slice(0, 10);
}

export function uniformAnswer(probeId: string, opts: ReplayOptions): ProbeAnswer {
  const rng = new Rng(`${opts.seed}:${probeId}`);
  const span = isoDaysBetween(opts.dateStart, opts.dateEnd);
  return {
    probe_id: probeId,
    ticker_top5: rng.sample(opts.universe, Math.min(5, opts.universe.length)),
    date_guess: isoAddDays(opts.dateStart, rng.int(span + 1)),
    board_guess: rng.choice(BOARDS),
  };
}

export function replayProbeDir(probeDir: string, outPath: string, opts: ReplayOptions): number {
  const probesDir = path.join(probeDir, 'probes');
  const files = fs.readdirSync(probesDir).filter((f) => f.endsWith('.json')).sort();
  const lines: string[] = [];
  for (const file of files) {
    let payload: unknown;
    try {
      payload = JSON.parse(fs.readFileSync(path.join(probesDir, file), 'utf-8'));
    } catch (e) {
      process.stderr.write(`skipping malformed probe file ${file}: ${String(e)}\n`);
      continue;
    }
    const probeId = (payload as { probe_id?: string }).probe_id;
    if (!probeId) {
      process.stderr.write(`skipping probe file ${file}: no probe_id\n`);
      continue;
    }
    lines.push(JSON.stringify(uniformAnswer(probeId, opts)));
  }
  fs.writeFileSync(outPath, lines.join('\n') + (lines.length ? '\n' : ''), 'utf-8');
  return lines.length;
}
