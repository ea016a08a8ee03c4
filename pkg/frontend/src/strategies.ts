/**
 * Scripted strategies. The momentum implementation follows the normative
 * algorithm in docs/WIRE_PROTOCOL.md exactly: the harness-side trade log it
 * produces must be byte-identical to the in-process reference agent's.
 */
import type { LlmBackend, ChatMessage } from './backend.js';
import type { ActionDocument, ToolResultPayload, UserData } from './protocol.js';
import { Rng } from './rng.js';
import { dropOffendingOrders, validateAction } from './validate.js';

export interface StepContext {
  stepIndex: number;
  mode: string;
  data: UserData;
  text: string;
  system?: string;
  callTool(name: string, args: Record<string, unknown>): Promise<ToolResultPayload>;
  submit(action: ActionDocument): Promise<void>;
}

export interface Strategy {
  name: string;
  runStep(ctx: StepContext): Promise<void>;
  /** Repair after a harness violation; default drops to an empty book. */
  repair?(codes: string[], detail: string): ActionDocument;
}

const REPAIR_ACTION: ActionDocument = {
  orders: [],
  overall_reason: 'repair after validation feedback: holding this step',
};

export class CashStrategy implements Strategy {
  name = 'cash';

  async runStep(ctx: StepContext): Promise<void> {
    await ctx.submit({
      orders: [],
      overall_reason: 'no identifiable edge today; hold cash and wait',
    });
  }
}

export class RandomStrategy implements Strategy {
  name: string;

  constructor(private readonly k: number, private readonly seed: number) {
    this.name = `random-k${k}`;
  }

  async runStep(ctx: StepContext): Promise<void> {
    const universe = [...ctx.data.universe];
    const rng = new Rng(`${this.seed}:${ctx.stepIndex}`);
    const k = Math.min(this.k, universe.length);
    const picks = rng.sample(universe, k).sort();
    await ctx.submit({
      orders: picks.map((sid) => ({
        stock_id: sid,
        side: 'BUY' as const,
        target_weight: 1 / k,
        confidence: 0.5,
        reason: 'seeded random allocation for the noise baseline',
      })),
      overall_reason: 'uniform random book; exists only to calibrate the metric panel',
    });
  }
}

interface ScreenRow {
  stock_id: string;
  rank: number;
  vol_20d: number | null;
  [k: string]: unknown;
}

export class MomentumTopKStrategy implements Strategy {
  name: string;

  constructor(private readonly k: number) {
    this.name = `momentum-top${k}`;
  }

  async runStep(ctx: StepContext): Promise<void> {
    if (ctx.mode !== 'open_research') {
      await ctx.submit({
        orders: [],
        overall_reason: 'momentum strategy needs the research tools; holding',
      });
      return;
    }
    const poolK = Math.max(2 * this.k, 10);
    const screen = await ctx.callTool('screen_candidates', { sort_by: 'ret_20d', top_k: poolK });
    const state = await ctx.callTool('portfolio_state', {});
    if (!screen.ok || !state.ok) {
      await ctx.submit({
        orders: [],
        overall_reason: 'research tools unavailable this step; holding',
      });
      return;
    }
    const rows = (screen.payload!.candidates as ScreenRow[]) ?? [];
    const vols = rows.map((r) => r.vol_20d).filter((v): v is number => v !== null).sort((a, b) => a - b);
    let median: number | null = null;
    if (vols.length > 0) {
      median = vols.length % 2 === 1
        ? vols[(vols.length - 1) / 2]!
        : (vols[vols.length / 2 - 1]! + vols[vols.length / 2]!) / 2;
    }
    const quiet = rows.filter((r) => r.vol_20d !== null && median !== null && r.vol_20d < median);
    const targets = quiet.slice(0, this.k);
    const targetIds = targets.map((r) => r.stock_id);
    const held = (state.payload!.positions as { stock_id: string }[]).map((p) => p.stock_id);

    const orders: ActionDocument['orders'] = [];
    for (const sid of held) {
      if (!targetIds.includes(sid)) {
        orders.push({
          stock_id: sid,
          side: 'SELL',
          target_weight: 0.0,
          confidence: 0.5,
          reason: `dropped out of the momentum top-${this.k}; exit position`,
        });
      }
    }
    const w = 1 / this.k;
    for (const r of targets) {
      if (held.includes(r.stock_id)) continue;
      orders.push({
        stock_id: r.stock_id,
        side: 'BUY',
        target_weight: w,
        confidence: 0.6,
        reason: `momentum rank ${r.rank} with below-median volatility`,
      });
    }
    await ctx.submit({
      orders,
      overall_reason: `hold top-${this.k} momentum names with below-median volatility`,
    });
  }
}

/**
 * Wraps the LLM backend seam: renders the step into a chat transcript,
 * forwards backend tool calls through the harness, pre-validates backend
 * actions (dropping offending orders, retrying the backend on garbage) and
 * falls back to a hold when the backend never produces a usable action.
 */
export class StubLlmStrategy implements Strategy {
  name: string;

  constructor(private readonly backend: LlmBackend, private readonly maxAttempts = 3) {
    this.name = `stub-llm-${backend.name}`;
  }

  async runStep(ctx: StepContext): Promise<void> {
    const messages: ChatMessage[] = [];
    if (ctx.system) messages.push({ role: 'system', content: ctx.system });
    messages.push({ role: 'user', content: `[step ${ctx.stepIndex}]\n${ctx.text}` });

    for (let attempt = 0; attempt < this.maxAttempts; attempt++) {
      const resp = this.backend.complete(messages, attempt);
      if (resp.kind === 'tool_calls') {
        for (const call of resp.calls) {
          const result = await ctx.callTool(call.name, call.args);
          messages.push({ role: 'assistant', content: `tool_call ${call.name}` });
          messages.push({ role: 'tool', content: JSON.stringify(result) });
        }
        continue;
      }
      let action: unknown;
      try {
        action = JSON.parse(resp.text);
      } catch {
        messages.push({ role: 'assistant', content: resp.text });
        messages.push({ role: 'user', content: 'that was not valid JSON; emit the action object only' });
        continue;
      }
      let doc = action as ActionDocument;
      const violations = validateAction(doc);
      if (violations.length > 0) {
        const orderLevel = violations.every((v) => v.orderIndex !== undefined);
        if (!orderLevel) {
          messages.push({ role: 'user', content: 'action failed local validation; try again' });
          continue;
        }
        doc = dropOffendingOrders(doc, violations);
      }
      await ctx.submit(doc);
      return;
    }
    await ctx.submit({
      orders: [],
      overall_reason: 'backend produced no valid action; falling back to hold',
    });
  }

  repair(codes: string[], detail: string): ActionDocument {
    return REPAIR_ACTION;
  }
}

export function buildStrategy(kind: string, opts: { k?: number; seed?: number; backend?: LlmBackend }): Strategy {
  switch (kind) {
    case 'cash':
      return new CashStrategy();
    case 'random':
      return new RandomStrategy(opts.k ?? 5, opts.seed ?? 0);
    case 'momentum_topk':
      return new MomentumTopKStrategy(opts.k ?? 5);
    case 'stub_llm': {
      if (!opts.backend) throw new Error('stub_llm needs a backend');
      return new StubLlmStrategy(opts.backend);
    }
    default:
      throw new Error(`unknown strategy '${kind}'; choose cash|random|momentum_topk|stub_llm`);
  }
}
