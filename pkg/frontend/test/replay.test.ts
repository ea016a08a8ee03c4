import * as fs from 'node:fs';
import * as os from 'node:os';
import * as path from 'node:path';
import { afterEach, beforeEach, describe, expect, it } from 'vitest';
import { replayProbeDir, uniformAnswer } from '../src/replayProbe.js';

const OPTS = {
  universe: ['SH600001', 'SH600002', 'SZ300001', 'BJ830001', 'SH688001', 'SH600003'],
  dateStart: '2021-01-04',
  dateEnd: '2022-02-25',
  seed: 4,
};

describe('uniformAnswer', () => {
  it('is deterministic per probe id and seed', () => {
    const a = uniformAnswer('probe_12', OPTS);
    const b = uniformAnswer('probe_12', OPTS);
    expect(a).toEqual(b);
    const c = uniformAnswer('probe_13', OPTS);
    expect(c).not.toEqual(a);
  });

  it('guesses inside the configured spaces', () => {
    for (let i = 0; i < 50; i++) {
      const a = uniformAnswer(`probe_${i}`, OPTS);
      expect(a.ticker_top5.length).toBe(5);
      expect(new Set(a.ticker_top5).size).toBe(5);
      for (const t of a.ticker_top5) expect(OPTS.universe).toContain(t);
      expect(a.date_guess >= OPTS.dateStart && a.date_guess <= OPTS.dateEnd).toBe(true);
      expect(['MAIN', 'CHINEXT', 'STAR', 'BSE']).toContain(a.board_guess);
    }
  });
});

describe('replayProbeDir', () => {
  let dir: string;

  beforeEach(() => {
    dir = fs.mkdtempSync(path.join(os.tmpdir(), 'probes-'));
    fs.mkdirSync(path.join(dir, 'probes'));
  });

  afterEach(() => {
    fs.rmSync(dir, { recursive: true, force: true });
  });

  it('answers every well-formed probe and skips garbage', () => {
    fs.writeFileSync(path.join(dir, 'probes', 'probe_1.json'),
      JSON.stringify({ probe_id: 'probe_1', views: {} }));
    fs.writeFileSync(path.join(dir, 'probes', 'probe_2.json'),
      JSON.stringify({ probe_id: 'probe_2', views: {} }));
    fs.writeFileSync(path.join(dir, 'probes', 'broken.json'), '{nope');
    const out = path.join(dir, 'answers.jsonl');
    const n = replayProbeDir(dir, out, OPTS);
    expect(n).toBe(2);
    const lines = fs.readFileSync(out, 'utf-8').trim().split('\n');
    expect(lines).toHaveLength(2);
    const first = JSON.parse(lines[0]!);
    expect(first.probe_id).toBe('probe_1');
  });

  it('empty probe dir writes an empty answers file', () => {
    const out = path.join(dir, 'answers.jsonl');
    expect(replayProbeDir(dir, out, OPTS)).toBe(0);
    expect(fs.readFileSync(out, 'utf-8')).toBe('');
  });

  it('identical seeds reproduce identical answer files', () => {
    for (const pid of ['probe_7', 'probe_8', 'probe_9']) {
      fs.writeFileSync(path.join(dir, 'probes', `${pid}.json`),
        JSON.stringify({ probe_id: pid, views: {} }));
    }
    const out1 = path.join(dir, 'a1.jsonl');
    const out2 = path.join(dir, 'a2.jsonl');
    replayProbeDir(dir, out1, OPTS);
    replayProbeDir(dir, out2, OPTS);
    expect(fs.readFileSync(out1, 'utf-8')).toBe(fs.readFileSync(out2, 'utf-8'));
  });
});
