"""Build a tiny inception network, train it on templates, and check its gradients.

Run with ``python demos/01_autodiff_and_gradcheck.py``.
"""
import numpy as np

from eegreach import model as M
from eegreach.autodiff import Tensor, gradient_check, softmax_cross_entropy

# A tiny grid (3 x 3 cells, 20 samples) keeps everything fast.
spec = M.ModelSpec.tiny()
net = M.build_model("inception3d", spec, seed=2)
print(f"tiny inception3d: {net.parameter_count()} parameters, "
      f"blocks {[b.spec.out_channels for b in net.inception_blocks()]}")

# Move biases off zero so no ReLU sits exactly on its kink, then compare the
# analytic gradient against central finite differences.
rng = np.random.default_rng(0)
for name, p in net.parameters().items():
    if name.endswith(".bias"):
        p.data = rng.uniform(-0.1, 0.1, p.data.shape)
x = np.random.default_rng(3).standard_normal((2, 1, 3, 3, spec.n_times))
report = gradient_check(lambda: softmax_cross_entropy(net.forward(Tensor(x)), [1, 4]),
                        net.parameters(), max_coords=6)
print(f"gradient check: passed={report.passed}, max relative error {report.max_rel_error:.2e}")

# Six fixed templates plus noise: the network should fit them quickly.
templates = rng.standard_normal((6, 1, 3, 3, spec.n_times))
y = np.repeat(np.arange(6), 12)
xs = templates[y] + 0.3 * rng.standard_normal((len(y), 1, 3, 3, spec.n_times))
net = M.build_model("inception3d", spec, seed=0)
cfg = M.TrainConfig(epochs=15, batch_size=8, lr=1e-2, seed=0, patience=15, val_fraction=0.0)
_, state = M.train(net, xs, y, cfg)
for row in state.history[::5] + state.history[-1:]:
    print(f"epoch {row['epoch']:2d}  loss {row['train_loss']:.3f}  acc {row['train_acc']:.2f}")
