/**
 * Wire protocol types and framing: one JSON object per newline-terminated
 * line. See docs/WIRE_PROTOCOL.md at the repository root for the contract.
 */

export interface OrderDoc {
  stock_id: string;
  side: 'BUY' | 'SELL';
  target_weight?: number;
  shares?: number;
  confidence: number;
  reason: string;
}

export interface ActionDocument {
  orders: OrderDoc[];
  overall_reason: string;
}

export interface PositionView {
  stock_id: string;
  shares_total: number;
  shares_available: number;
  [k: string]: unknown;
}

export interface UserData {
  step_index: number;
  mode: string;
  date_label: string;
  universe: string[];
  positions: PositionView[];
  cash: number;
  total_value: number;
  [k: string]: unknown;
}

export interface UserMessage {
  type: 'user_message';
  step: number;
  content: {
    text: string;
    data: UserData;
    system?: string;
    llm?: Record<string, unknown>;
  };
}

export interface ToolResultMessage {
  type: 'tool_result';
  call_id: string;
  payload: ToolResultPayload;
}

export interface ToolResultPayload {
  ok: boolean;
  payload?: Record<string, unknown>;
  error?: string;
  error_code?: string;
}

export interface SubmissionDemand {
  type: 'submission_demand';
}

export interface ViolationMessage {
  type: 'violation';
  codes: string[];
  detail: string;
}

export type HarnessMessage = UserMessage | ToolResultMessage | SubmissionDemand | ViolationMessage;

export interface ToolCallMessage {
  type: 'tool_call';
  call_id: string;
  name: string;
  args: Record<string, unknown>;
}

export interface SubmitMessage {
  type: 'submit';
  action: ActionDocument;
}

export type AgentMessage = ToolCallMessage | SubmitMessage;

export function encodeLine(msg: AgentMessage | HarnessMessage): string {
  return JSON.stringify(msg) + '\n';
}

export function decodeLine(line: string): HarnessMessage | null {
  try {
    const obj = JSON.parse(line);
    if (obj && typeof obj === 'object' && typeof obj.type === 'string') {
      return obj as HarnessMessage;
    }
    return null;
  } catch {
    return null;
  }
}
