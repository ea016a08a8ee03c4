import { describe, expect, it } from 'vitest';
import type { HarnessMessage, ToolResultPayload, UserData } from '../src/protocol.js';
import { decodeLine } from '../src/protocol.js';
import { AgentSession } from '../src/session.js';
import { StubBackend } from '../src/backend.js';
import { buildStrategy } from '../src/strategies.js';

function userData(partial: Partial<UserData> = {}): UserData {
  return {
    step_index: 0,
    mode: 'open_research',
    date_label: 'day_+0',
    universe: ['asset_0000', 'asset_0001', 'asset_0002'],
    positions: [],
    cash: 1_000_000,
    total_value: 1_000_000,
    ...partial,
  };
}

function userMessage(step: number, data: Partial<UserData> = {}): HarnessMessage {
  return {
    type: 'user_message',
    step,
    content: { text: `step ${step}`, data: userData({ step_index: step, ...data }) },
  };
}

class Harness {
  outbound: ReturnType<typeof decodeLine>[] = [];
  session: AgentSession;

  constructor(strategy: ConstructorParameters<typeof AgentSession>[0]) {
    this.session = new AgentSession(strategy, (line) => {
      this.outbound.push(decodeLine(line) as any);
    });
  }

  async feed(msg: HarnessMessage): Promise<void> {
    await this.session.handleMessage(msg);
  }

  submissions() {
    return this.outbound.filter((m: any) => m?.type === 'submit') as any[];
  }

  toolCalls() {
    return this.outbound.filter((m: any) => m?.type === 'tool_call') as any[];
  }
}

const SCREEN_PAYLOAD: ToolResultPayload = {
  ok: true,
  payload: {
    candidates: [
      { stock_id: 'asset_0002', rank: 1, ret_20d: 0.3, vol_20d: 0.01 },
      { stock_id: 'asset_0001', rank: 2, ret_20d: 0.2, vol_20d: 0.05 },
      { stock_id: 'asset_0000', rank: 3, ret_20d: 0.1, vol_20d: 0.03 },
    ],
  },
};

const EMPTY_PORTFOLIO: ToolResultPayload = { ok: true, payload: { positions: [], cash: 1_000_000 } };

describe('AgentSession', () => {
  it('cash strategy submits once per step', async () => {
    const h = new Harness(buildStrategy('cash', {}));
    await h.feed(userMessage(0, { mode: 'memory_only' }));
    await h.feed({ type: 'submission_demand' });
    await h.feed(userMessage(1, { mode: 'memory_only' }));
    expect(h.submissions()).toHaveLength(2);
    expect(h.submissions()[0].action.orders).toEqual([]);
  });

  it('momentum researches then submits buys below median volatility', async () => {
    const h = new Harness(buildStrategy('momentum_topk', { k: 1 }));
    await h.feed(userMessage(0));
    expect(h.toolCalls()).toHaveLength(1);
    expect(h.toolCalls()[0].name).toBe('screen_candidates');
    await h.feed({ type: 'tool_result', call_id: h.toolCalls()[0].call_id, payload: SCREEN_PAYLOAD });
    expect(h.toolCalls()).toHaveLength(2);
    expect(h.toolCalls()[1].name).toBe('portfolio_state');
    await h.feed({ type: 'tool_result', call_id: h.toolCalls()[1].call_id, payload: EMPTY_PORTFOLIO });
    const subs = h.submissions();
    expect(subs).toHaveLength(1);
    // rank-1 name has vol 0.01 < median 0.03
    expect(subs[0].action.orders).toEqual([{
      stock_id: 'asset_0002',
      side: 'BUY',
      target_weight: 1,
      confidence: 0.6,
      reason: 'momentum rank 1 with below-median volatility',
    }]);
  });

  it('momentum abstains outside open research', async () => {
    const h = new Harness(buildStrategy('momentum_topk', { k: 2 }));
    await h.feed(userMessage(0, { mode: 'fixed_candidate' }));
    expect(h.toolCalls()).toHaveLength(0);
    expect(h.submissions()[0].action.orders).toEqual([]);
  });

  it('violation triggers a repair submission', async () => {
    const h = new Harness(buildStrategy('cash', {}));
    await h.feed(userMessage(0, { mode: 'memory_only' }));
    await h.feed({ type: 'violation', codes: ['reason_too_short'], detail: 'x' });
    const subs = h.submissions();
    expect(subs).toHaveLength(2);
    expect(subs[1].action.orders).toEqual([]);
  });

  it('demand without a submission repairs exactly once', async () => {
    const neverSubmits = {
      name: 'mute',
      async runStep() {
        /* deliberately silent */
      },
    };
    const h = new Harness(neverSubmits);
    await h.feed(userMessage(0));
    expect(h.submissions()).toHaveLength(0);
    await h.feed({ type: 'submission_demand' });
    expect(h.submissions()).toHaveLength(1);
  });

  it('strategy exceptions degrade to a repair submission', async () => {
    const exploding = {
      name: 'boom',
      async runStep() {
        throw new Error('strategy bug');
      },
    };
    const h = new Harness(exploding);
    await h.feed(userMessage(0));
    expect(h.submissions()).toHaveLength(1);
  });

  it('random strategy is deterministic per (seed, step)', async () => {
    const runs: string[][] = [];
    for (let i = 0; i < 2; i++) {
      const h = new Harness(buildStrategy('random', { k: 2, seed: 7 }));
      await h.feed(userMessage(0, { mode: 'memory_only' }));
      runs.push(h.submissions()[0].action.orders.map((o: any) => o.stock_id));
    }
    expect(runs[0]).toEqual(runs[1]);
  });

  it('pre-validation blocks a knowingly invalid submit', async () => {
    const sendsGarbage = {
      name: 'bad',
      async runStep(ctx: any) {
        await ctx.submit({ orders: [{ stock_id: 'x' }], overall_reason: 'way too short' });
      },
    };
    const h = new Harness(sendsGarbage);
    await h.feed(userMessage(0));
    const subs = h.submissions();
    expect(subs).toHaveLength(1);
    expect(subs[0].action.orders).toEqual([]);
    expect(subs[0].action.overall_reason).toContain('pre-validation');
  });

  it('replays a recorded transcript to the same outbound sequence', async () => {
    // recorded from the reference harness: one research step with k=1
    const transcript: HarnessMessage[] = [
      userMessage(0),
      { type: 'tool_result', call_id: 's0c1', payload: SCREEN_PAYLOAD },
      { type: 'tool_result', call_id: 's0c2', payload: EMPTY_PORTFOLIO },
    ];
    const expected = [
      { type: 'tool_call', name: 'screen_candidates' },
      { type: 'tool_call', name: 'portfolio_state' },
      { type: 'submit' },
    ];
    for (let run = 0; run < 2; run++) {
      const h = new Harness(buildStrategy('momentum_topk', { k: 1 }));
      for (const msg of transcript) await h.feed(msg);
      expect(h.outbound.map((m: any) => m.type)).toEqual(expected.map((e) => e.type));
      expect((h.outbound[0] as any).name).toBe('screen_candidates');
    }
  });
});

describe('stub LLM backend seam', () => {
  it('step 0 issues a tool call then a valid hold', async () => {
    const h = new Harness(buildStrategy('stub_llm', { backend: new StubBackend() }));
    await h.feed(userMessage(0));
    expect(h.toolCalls()).toHaveLength(1);
    await h.feed({ type: 'tool_result', call_id: h.toolCalls()[0].call_id, payload: EMPTY_PORTFOLIO });
    expect(h.submissions()).toHaveLength(1);
    expect(h.submissions()[0].action.orders).toEqual([]);
  });

  it('step 1 drops its contradictory order before sending', async () => {
    const h = new Harness(buildStrategy('stub_llm', { backend: new StubBackend() }));
    await h.feed(userMessage(1));
    const subs = h.submissions();
    expect(subs).toHaveLength(1);
    expect(subs[0].action.orders).toEqual([]);  // offending order dropped
  });

  it('step 2 retries past unparseable text', async () => {
    const h = new Harness(buildStrategy('stub_llm', { backend: new StubBackend() }));
    await h.feed(userMessage(2));
    const subs = h.submissions();
    expect(subs).toHaveLength(1);
    expect(subs[0].action.overall_reason).toContain('stub backend holds');
  });
});
