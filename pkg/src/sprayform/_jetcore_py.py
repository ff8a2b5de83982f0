"""Pure-numpy jet kernels, the fallback when the compiled extension is absent.

Same call signatures as ``sprayform._jetcore``; both consume the index tables
built by :class:`sprayform.jets.JetTables`.
"""

import numpy as np


def mul(a, b, t):
    return np.bincount(t.mul_out, weights=t.mul_w * a[t.mul_a] * b[t.mul_b],
                       minlength=t.nmon)


def div(a, b, t):
    q = np.empty(t.nmon)
    b0 = b[0]
    heads = t.div_heads
    db, dq, dw = t.div_b, t.div_q, t.div_w
    for k in range(t.nmon):
        s, e = heads[k], heads[k + 1]
        acc = a[k]
        if e > s:
            acc = acc - np.dot(dw[s:e], b[db[s:e]] * q[dq[s:e]])
        q[k] = acc / b0
    return q
