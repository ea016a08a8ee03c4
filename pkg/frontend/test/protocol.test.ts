import { describe, expect, it } from 'vitest';
import { decodeLine, encodeLine, type SubmitMessage } from '../src/protocol.js';
import { dropOffendingOrders, validateAction } from '../src/validate.js';

describe('framing', () => {
  it('round-trips a message', () => {
    const msg: SubmitMessage = {
      type: 'submit',
      action: { orders: [], overall_reason: 'twenty characters or more' },
    };
    expect(decodeLine(encodeLine(msg))).toEqual(msg);
  });

  it('returns null on garbage', () => {
    expect(decodeLine('{nope')).toBeNull();
    expect(decodeLine('42')).toBeNull();
  });
});

describe('local pre-validation', () => {
  const goodOrder = {
    stock_id: 'asset_0001',
    side: 'BUY' as const,
    target_weight: 0.1,
    confidence: 0.5,
    reason: 'momentum rank one pick',
  };

  it('accepts an empty abstention', () => {
    expect(validateAction({ orders: [], overall_reason: 'no identifiable edge today, hold' })).toEqual([]);
  });

  it('accepts a well-formed order', () => {
    expect(validateAction({ orders: [goodOrder], overall_reason: 'diversified momentum book today' })).toEqual([]);
  });

  it('rejects both sizing fields', () => {
    const v = validateAction({
      orders: [{ ...goodOrder, shares: 100 }],
      overall_reason: 'diversified momentum book today',
    });
    expect(v.map((x) => x.code)).toContain('weight_shares_exclusive');
  });

  it('rejects a nine-character reason', () => {
    const v = validateAction({
      orders: [{ ...goodOrder, reason: 'too short' }],
      overall_reason: 'diversified momentum book today',
    });
    expect(v.map((x) => x.code)).toContain('reason_too_short');
  });

  it('rejects a nineteen-character overall reason', () => {
    const v = validateAction({ orders: [], overall_reason: 'nineteen chars here' });
    expect(v.map((x) => x.code)).toContain('overall_reason_too_short');
  });

  it('drops only the offending orders', () => {
    const action = {
      orders: [goodOrder, { ...goodOrder, confidence: 2.0 }],
      overall_reason: 'diversified momentum book today',
    };
    const v = validateAction(action);
    const repaired = dropOffendingOrders(action, v);
    expect(repaired.orders).toEqual([goodOrder]);
    expect(validateAction(repaired)).toEqual([]);
  });
});
