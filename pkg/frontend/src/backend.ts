/**
 * The LLM backend seam: one function from a message list to either text or
 * tool calls. A vendor client would implement this interface; the shipped
 * backend is a deterministic canned-response table keyed by step, rich
 * enough to exercise the adapter's validation, repair and fallback paths.
 */

export interface BackendToolCall {
  name: string;
  args: Record<string, unknown>;
}

export type BackendResponse =
  | { kind: 'text'; text: string }
  | { kind: 'tool_calls'; calls: BackendToolCall[] };

export interface ChatMessage {
  role: 'system' | 'user' | 'assistant' | 'tool';
  content: string;
}

export interface LlmBackend {
  name: string;
  complete(messages: ChatMessage[], attempt: number): BackendResponse;
}

const HOLD_ACTION = JSON.stringify({
  orders: [],
  overall_reason: 'stub backend holds cash while idle this step',
});

/**
 * Canned responses by (step mod table length, attempt). Step 0 researches
 * then submits a valid action; step 1 first emits an order with both sizing
 * fields (caught by local pre-validation, the offending order is dropped);
 * step 2 first emits unparseable text (local retry, then a valid hold).
 */
export class StubBackend implements LlmBackend {
  name = 'stub';

  complete(messages: ChatMessage[], attempt: number): BackendResponse {
    const step = this.stepOf(messages);
    switch (step % 3) {
      case 0:
        if (!messages.some((m) => m.role === 'tool')) {
          return { kind: 'tool_calls', calls: [{ name: 'portfolio_state', args: {} }] };
        }
        return { kind: 'text', text: HOLD_ACTION };
      case 1:
        if (attempt === 0) {
          return {
            kind: 'text',
            text: JSON.stringify({
              orders: [{
                stock_id: 'asset_0000',
                side: 'BUY',
                target_weight: 0.05,
                shares: 100,
                confidence: 0.5,
                reason: 'canned contradictory sizing order',
              }],
              overall_reason: 'stub backend first attempt carries an invalid order',
            }),
          };
        }
        return { kind: 'text', text: HOLD_ACTION };
      default:
        if (attempt === 0) {
          return { kind: 'text', text: 'the stub model rambles instead of emitting JSON' };
        }
        return { kind: 'text', text: HOLD_ACTION };
    }
  }

  private stepOf(messages: ChatMessage[]): number {
    for (let i = messages.length - 1; i >= 0; i--) {
      const m = messages[i]!;
      if (m.role === 'user') {
        const match = /^\[step (\d+)\]/.exec(m.content);
        if (match) return parseInt(match[1]!, 10);
      }
    }
    return 0;
  }
}
