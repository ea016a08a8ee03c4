/**
 * Local pre-validation of action documents, mirroring the harness rules so
 * a well-behaved adapter never sends a submission that will bounce.
 */
import type { ActionDocument, OrderDoc } from './protocol.js';

export interface LocalViolation {
  code: string;
  message: string;
  orderIndex?: number;
}

const MIN_REASON = 10;
const MIN_OVERALL_REASON = 20;

function checkOrder(o: unknown, i: number, out: LocalViolation[]): void {
  if (typeof o !== 'object' || o === null || Array.isArray(o)) {
    out.push({ code: 'order_not_object', message: `orders[${i}] must be an object`, orderIndex: i });
    return;
  }
  const ord = o as Partial<OrderDoc>;
  if (typeof ord.stock_id !== 'string' || !ord.stock_id) {
    out.push({ code: 'stock_id_missing', message: `orders[${i}].stock_id missing`, orderIndex: i });
  }
  if (ord.side !== 'BUY' && ord.side !== 'SELL') {
    out.push({ code: 'side_invalid', message: `orders[${i}].side must be BUY or SELL`, orderIndex: i });
  }
  const hasW = ord.target_weight !== undefined && ord.target_weight !== null;
  const hasS = ord.shares !== undefined && ord.shares !== null;
  if (hasW === hasS) {
    out.push({
      code: 'weight_shares_exclusive',
      message: `orders[${i}] needs exactly one of target_weight or shares`,
      orderIndex: i,
    });
  }
  if (hasW && (typeof ord.target_weight !== 'number' || ord.target_weight < 0 || ord.target_weight > 1)) {
    out.push({ code: 'weight_range', message: `orders[${i}].target_weight outside [0, 1]`, orderIndex: i });
  }
  if (hasS && (typeof ord.shares !== 'number' || !Number.isInteger(ord.shares) || ord.shares <= 0)) {
    out.push({ code: 'shares_positive', message: `orders[${i}].shares must be a positive integer`, orderIndex: i });
  }
  if (typeof ord.confidence !== 'number' || ord.confidence < 0 || ord.confidence > 1) {
    out.push({ code: 'confidence_range', message: `orders[${i}].confidence outside [0, 1]`, orderIndex: i });
  }
  if (typeof ord.reason !== 'string' || ord.reason.length < MIN_REASON) {
    out.push({ code: 'reason_too_short', message: `orders[${i}].reason under ${MIN_REASON} chars`, orderIndex: i });
  }
}

export function validateAction(action: unknown): LocalViolation[] {
  const out: LocalViolation[] = [];
  if (typeof action !== 'object' || action === null || Array.isArray(action)) {
    return [{ code: 'not_object', message: 'action must be a JSON object' }];
  }
  const doc = action as Partial<ActionDocument>;
  if (!Array.isArray(doc.orders)) {
    out.push({ code: 'orders_missing', message: "top-level 'orders' must be a list" });
  } else {
    doc.orders.forEach((o, i) => checkOrder(o, i, out));
  }
  if (typeof doc.overall_reason !== 'string' || doc.overall_reason.length < MIN_OVERALL_REASON) {
    out.push({ code: 'overall_reason_too_short', message: `overall_reason under ${MIN_OVERALL_REASON} chars` });
  }
  return out;
}

/** Drop the orders named by violations; the standard repair move. */
export function dropOffendingOrders(action: ActionDocument, violations: LocalViolation[]): ActionDocument {
  const bad = new Set(violations.map((v) => v.orderIndex).filter((i) => i !== undefined));
  return {
    orders: action.orders.filter((_, i) => !bad.has(i)),
    overall_reason: action.overall_reason,
  };
}
