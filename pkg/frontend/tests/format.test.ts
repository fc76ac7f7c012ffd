import { describe, expect, test } from 'vitest';

import { escapeHtml, fmt2, fmtSigned, round2 } from '../src/format.js';

describe('two-decimal rounding', () => {
  test('halves round away from zero, despite float representation', () => {
    expect(round2(1.005)).toBe(1.01);
    expect(round2(2.675)).toBe(2.68);
    expect(round2(-1.005)).toBe(-1.01);
    expect(round2(2.674999)).toBe(2.67);
  });

  test('fmt2 always shows two decimals', () => {
    expect(fmt2(5000)).toBe('5000.00');
    expect(fmt2(23.571428)).toBe('23.57');
    expect(fmt2(-0.0001)).toBe('0.00');
  });

  test('fmtSigned marks gains explicitly', () => {
    expect(fmtSigned(12.345)).toBe('+12.35');
    expect(fmtSigned(-12.345)).toBe('-12.35');
    expect(fmtSigned(0)).toBe('0.00');
  });
});

describe('escapeHtml', () => {
  test('neutralises markup-significant characters', () => {
    expect(escapeHtml('<b>&"x"</b>')).toBe('&lt;b&gt;&amp;&quot;x&quot;&lt;/b&gt;');
    expect(escapeHtml(undefined)).toBe('');
  });
});
