/**
 * CLI entry.
 *
 *   serve --strategy cash|random|momentum_topk|stub_llm [--k N] [--seed N]
 *         [--connect stdio|<port>]
 *   replay-probe --dir <probe-set> --out answers.jsonl --universe tickers.txt
 *         --date-start YYYY-MM-DD --date-end YYYY-MM-DD [--seed N]
 *
 * In serve mode the process speaks the wire protocol on stdio (default) or
 * listens for one TCP connection on the given port.
 */
import * as fs from 'node:fs';
import * as net from 'node:net';
import * as readline from 'node:readline';
import { StubBackend } from './backend.js';
import { decodeLine } from './protocol.js';
import { replayProbeDir } from './replayProbe.js';
import { AgentSession } from './session.js';
import { buildStrategy } from './strategies.js';

function parseArgs(argv: string[]): Record<string, string> {
  const out: Record<string, string> = {};
  for (let i = 0; i < argv.length; i++) {
    const a = argv[i]!;
    if (a.startsWith('--')) {
      const key = a.slice(2);
      const next = argv[i + 1];
      if (next !== undefined && !next.startsWith('--')) {
        out[key] = next;
        i++;
      } else {
        out[key] = 'true';
      }
    }
  }
  return out;
}

async function serveStream(
  session: AgentSession,
  input: NodeJS.ReadableStream,
  onEnd: () => void,
): Promise<void> {
  const rl = readline.createInterface({ input, crlfDelay: Infinity });
  for await (const line of rl) {
    if (!line.trim()) continue;
    const msg = decodeLine(line);
    if (msg === null) continue; // unparseable harness line: ignore defensively
    await session.handleMessage(msg);
  }
  onEnd();
}

function makeStrategy(args: Record<string, string>) {
  const kind = args['strategy'];
  if (!kind) {
    process.stderr.write('serve: --strategy is required\n');
    process.exit(2);
  }
  return buildStrategy(kind, {
    k: args['k'] !== undefined ? parseInt(args['k'], 10) : undefined,
    seed: args['seed'] !== undefined ? parseInt(args['seed'], 10) : undefined,
    backend: kind === 'stub_llm' ? new StubBackend() : undefined,
  });
}

async function cmdServe(args: Record<string, string>): Promise<void> {
  const strategy = makeStrategy(args);
  const connect = args['connect'] ?? 'stdio';
  if (connect === 'stdio') {
    const session = new AgentSession(strategy, (line) => process.stdout.write(line));
    await serveStream(session, process.stdin, () => process.exit(0));
    return;
  }
  const port = parseInt(connect.includes(':') ? connect.split(':').pop()! : connect, 10);
  if (!Number.isFinite(port)) {
    process.stderr.write(`serve: cannot parse --connect ${connect}\n`);
    process.exit(2);
  }
  const server = net.createServer((socket) => {
    const session = new AgentSession(strategy, (line) => socket.write(line));
    void serveStream(session, socket, () => {
      socket.end();
      server.close();
    });
  });
  server.listen(port, () => {
    process.stderr.write(`listening on port ${port}\n`);
  });
}

function cmdReplayProbe(args: Record<string, string>): void {
  for (const req of ['dir', 'out', 'universe', 'date-start', 'date-end']) {
    if (!args[req]) {
      process.stderr.write(`replay-probe: --${req} is required\n`);
      process.exit(2);
    }
  }
  const universe = fs
    .readFileSync(args['universe']!, 'utf-8')
    .split('\n')
    .map((l) => l.trim())
    .filter((l) => l.length > 0);
  const n = replayProbeDir(args['dir']!, args['out']!, {
    universe,
    dateStart: args['date-start']!,
    dateEnd: args['date-end']!,
    seed: args['seed'] !== undefined ? parseInt(args['seed']!, 10) : 0,
  });
  process.stderr.write(`wrote ${n} answers to ${args['out']}\n`);
}

async function main(): Promise<void> {
  const [, , command, ...rest] = process.argv;
  const args = parseArgs(rest);
  switch (command) {
    case 'serve':
      await cmdServe(args);
      break;
    case 'replay-probe':
      cmdReplayProbe(args);
      break;
    default:
      process.stderr.write('usage: main.js serve|replay-probe [options]\n');
      process.exit(2);
  }
}

void main();
