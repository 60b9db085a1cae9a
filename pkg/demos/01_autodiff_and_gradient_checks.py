"""Tour of the tape-based autodiff core.

Builds a small computation on a tape, walks its recorded entries, runs the
reverse pass, and verifies analytic gradients against central finite
differences (the same oracle the test suite uses).
"""
import numpy as np

from unmtlab.diffcore import Tape, finite_diff_check

rng = np.random.default_rng(0)

# --- a tiny attention-flavoured computation -------------------------------
tape = Tape()
x = tape.leaf(rng.standard_normal((1, 4)), requires_grad=True)
W = tape.leaf(rng.standard_normal((4, 6)), requires_grad=True)
b = tape.leaf(np.zeros((1, 6)), requires_grad=True)

hidden = tape.tanh(tape.radd(tape.matmul(x, W), b))
loss = tape.ce(hidden, target=2, weight=1.0)

print(f"loss value: {tape.value(loss)[0, 0]:.6f}")
print(f"tape holds {len(tape)} nodes; recorded entries:")
for kind, inputs, out, aux in tape.entries:
    print(f"  node {out:2d} <- {kind}{inputs}" + (f" aux={aux}" if aux else ""))

grads = tape.backward(loss)
print("\ngradient of loss w.r.t. W (first row):")
print(" ", np.round(grads[W][0], 4))

# --- replay determinism ----------------------------------------------------
replayed = tape.replay()
identical = all(np.array_equal(replayed[i], tape.value(i)) for i in range(len(tape)))
print(f"\nreplay reproduces every forward value bit-for-bit: {identical}")

# --- finite-difference verification ----------------------------------------
def build(ex, handles):
    h = ex.tanh(ex.radd(ex.matmul(handles[0], handles[1]), handles[2]))
    return ex.ce(h, target=2, weight=1.0)

err = finite_diff_check(build, [tape.value(x), tape.value(W), tape.value(b)], eps=1e-5)
print(f"max relative error vs central differences: {err:.2e}")
assert err < 1e-4
print("gradients check out.")
