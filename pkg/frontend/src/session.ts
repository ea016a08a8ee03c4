/**
 * Client-side state machine for one agent connection.
 *
 * The harness is strictly request/response within a step: every tool_call
 * is answered by its tool_result before anything else arrives, so the
 * session keeps one pending-tool-result slot rather than a correlation map.
 * After a submit, the next inbound message is either a violation (repair
 * and resubmit), the next step's user_message, or stream close.
 */
import type {
  ActionDocument,
  AgentMessage,
  HarnessMessage,
  ToolResultPayload,
  UserMessage,
} from './protocol.js';
import { encodeLine } from './protocol.js';
import type { StepContext, Strategy } from './strategies.js';
import { validateAction } from './validate.js';

export type SessionState = 'awaiting_message' | 'researching' | 'must_submit';

const DEFAULT_TOOL_BUDGET = 99;

function flush(): Promise<void> {
  return new Promise((resolve) => setImmediate(resolve));
}

export class AgentSession {
  state: SessionState = 'awaiting_message';
  toolBudgetRemaining = DEFAULT_TOOL_BUDGET;
  submittedThisStep = false;
  readonly log: Array<{ dir: 'in' | 'out'; msg: unknown }> = [];

  private pendingToolResult: ((payload: ToolResultPayload) => void) | null = null;
  private systemPrompt: string | undefined;

  constructor(
    private readonly strategy: Strategy,
    private readonly write: (line: string) => void,
  ) {}

  private send(msg: AgentMessage): void {
    this.log.push({ dir: 'out', msg });
    this.write(encodeLine(msg));
  }

  /** Feed one inbound harness message; resolves once outbound replies are written. */
  async handleMessage(msg: HarnessMessage): Promise<void> {
    this.log.push({ dir: 'in', msg });
    switch (msg.type) {
      case 'user_message':
        this.startStep(msg);
        break;
      case 'tool_result': {
        if (this.pendingToolResult) {
          const resolve = this.pendingToolResult;
          this.pendingToolResult = null;
          resolve(msg.payload ?? { ok: false, error: 'empty payload', error_code: 'invalid_argument' });
        }
        break;
      }
      case 'violation':
        this.repair(msg.codes ?? [], msg.detail ?? '');
        break;
      case 'submission_demand':
        this.state = 'must_submit';
        break;
    }
    // let the strategy coroutine advance until it blocks on the next tool
    // result or finishes; outbound lines are written synchronously inside it
    await flush();
    if (msg.type === 'submission_demand' && !this.submittedThisStep) {
      this.repair(['submission_required'], 'harness demanded a submission');
    }
  }

  private startStep(msg: UserMessage): void {
    this.state = 'researching';
    this.submittedThisStep = false;
    this.toolBudgetRemaining = DEFAULT_TOOL_BUDGET;
    if (msg.content.system) this.systemPrompt = msg.content.system;

    let callCounter = 0;
    const ctx: StepContext = {
      stepIndex: msg.step,
      mode: msg.content.data?.mode ?? 'open_research',
      data: msg.content.data ?? ({} as UserMessage['content']['data']),
      text: msg.content.text ?? '',
      system: this.systemPrompt,
      callTool: (name, args) => this.callTool(msg.step, ++callCounter, name, args),
      submit: async (action) => this.submit(action),
    };
    void this.strategy.runStep(ctx).catch(() => {
      if (!this.submittedThisStep) this.repair(['strategy_error'], 'strategy raised');
    });
  }

  private callTool(step: number, n: number, name: string, args: Record<string, unknown>): Promise<ToolResultPayload> {
    if (this.state === 'must_submit') {
      return Promise.resolve({
        ok: false,
        error: 'submission already demanded',
        error_code: 'tool_not_allowed',
      });
    }
    if (this.toolBudgetRemaining <= 0) {
      return Promise.resolve({
        ok: false,
        error: 'local tool budget exhausted',
        error_code: 'budget_exhausted',
      });
    }
    this.toolBudgetRemaining -= 1;
    return new Promise<ToolResultPayload>((resolve) => {
      this.pendingToolResult = resolve;
      this.send({ type: 'tool_call', call_id: `s${step}c${n}`, name, args });
    });
  }

  private submit(action: ActionDocument): void {
    const violations = validateAction(action);
    if (violations.length > 0) {
      // never ship a knowingly-invalid document; degrade to a safe hold
      action = {
        orders: [],
        overall_reason: 'local pre-validation rejected the drafted action; holding',
      };
    }
    this.submittedThisStep = true;
    this.state = 'must_submit';
    this.send({ type: 'submit', action });
  }

  private repair(codes: string[], detail: string): void {
    const action = this.strategy.repair
      ? this.strategy.repair(codes, detail)
      : { orders: [], overall_reason: 'repair after validation feedback: holding this step' };
    this.submittedThisStep = true;
    this.send({ type: 'submit', action });
  }
}
