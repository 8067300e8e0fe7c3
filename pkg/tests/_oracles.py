"""Independent brute-force oracles used to pin the fast implementations.

Everything here is deliberately naive: dense Kronecker-product unitaries,
explicit python loops over samples/bins/pairs, and plain finite differences.
None of it shares code with the package.
"""

import numpy as np

I2 = np.eye(2, dtype=complex)


def rotation_matrix(kind, angle):
    half = angle / 2.0
    c, s = np.cos(half), np.sin(half)
    if kind == "RX":
        return np.array([[c, -1j * s], [-1j * s, c]])
    if kind == "RY":
        return np.array([[c, -s], [s, c]])
    if kind == "RZ":
        return np.array([[np.exp(-1j * half), 0], [0, np.exp(1j * half)]])
    raise ValueError(kind)


def single_qubit_unitary(num_qubits, target, u2):
    """Embed a 2x2 gate on the given qubit; qubit 0 is the LSB of the index."""
    full = np.kron(np.eye(2 ** (num_qubits - 1 - target), dtype=complex),
                   np.kron(u2, np.eye(2 ** target, dtype=complex)))
    return full


def cnot_unitary(num_qubits, control, target):
    dim = 2 ** num_qubits
    full = np.zeros((dim, dim), dtype=complex)
    for i in range(dim):
        j = i ^ (1 << target) if (i >> control) & 1 else i
        full[j, i] = 1.0
    return full


def gate_unitary(gate, num_qubits):
    if gate.kind == "CNOT":
        return cnot_unitary(num_qubits, gate.control, gate.target)
    return single_qubit_unitary(num_qubits, gate.target,
                                rotation_matrix(gate.kind, gate.angle))


def circuit_unitary(gates, num_qubits):
    full = np.eye(2 ** num_qubits, dtype=complex)
    for gate in gates:
        full = gate_unitary(gate, num_qubits) @ full
    return full


def random_circuit(rng, num_qubits, n_gates):
    from spiqgan.statevec import GateOp
    gates = []
    for _ in range(n_gates):
        kind = rng.choice(["RX", "RY", "RZ", "CNOT"])
        if kind == "CNOT" and num_qubits >= 2:
            control, target = rng.choice(num_qubits, size=2, replace=False)
            gates.append(GateOp("CNOT", int(target), control=int(control)))
        else:
            if kind == "CNOT":
                kind = "RY"
            gates.append(GateOp(str(kind), int(rng.integers(num_qubits)),
                                angle=float(rng.uniform(-2 * np.pi, 2 * np.pi))))
    return gates


def marginal_by_enumeration(amplitudes, num_qubits, qubit):
    total = 0.0
    for basis, amp in enumerate(amplitudes):
        if (basis >> qubit) & 1:
            total += abs(amp) ** 2
    return total


def central_difference(f, x, h=1e-5):
    """Gradient of scalar f at flat array x by central differences."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    flat = grad.reshape(-1)
    xflat = x.reshape(-1)
    for i in range(xflat.size):
        bumped = x.copy().reshape(-1)
        bumped[i] = xflat[i] + h
        up = f(bumped.reshape(x.shape))
        bumped[i] = xflat[i] - h
        down = f(bumped.reshape(x.shape))
        flat[i] = (up - down) / (2 * h)
    return grad


# --- naive spike statistics -------------------------------------------------

def brute_firing_rate(samples, bin_width):
    samples = [np.asarray(s) for s in samples]
    n = samples[0].shape[0]
    rates = []
    for i in range(n):
        total = 0
        bins = 0
        for s in samples:
            for t in range(s.shape[1]):
                total += s[i, t]
                bins += 1
        rates.append(total / (bins * bin_width))
    return np.array(rates)


def brute_pairwise_cov(samples):
    samples = [np.asarray(s, dtype=float) for s in samples]
    n = samples[0].shape[0]
    pooled = [[] for _ in range(n)]
    for s in samples:
        for i in range(n):
            pooled[i].extend(s[i])
    pooled = [np.array(p) for p in pooled]
    out = []
    for i in range(n):
        for j in range(i + 1, n):
            eij = float(np.mean(pooled[i] * pooled[j]))
            out.append(eij - pooled[i].mean() * pooled[j].mean())
    return np.array(out)


def brute_k_probability(samples):
    samples = [np.asarray(s) for s in samples]
    n = samples[0].shape[0]
    counts = np.zeros(n + 1)
    total = 0
    for s in samples:
        for t in range(s.shape[1]):
            k = int(s[:, t].sum())
            counts[k] += 1
            total += 1
    return counts / total


def brute_autocorrelogram(samples, max_lag):
    samples = [np.asarray(s, dtype=float) for s in samples]
    n = samples[0].shape[0]
    mu = np.zeros(n)
    var = np.zeros(n)
    total_bins = 0
    for s in samples:
        total_bins += s.shape[1]
        for i in range(n):
            mu[i] += s[i].sum()
    mu /= total_bins
    for s in samples:
        for i in range(n):
            var[i] += ((s[i] - mu[i]) ** 2).sum()
    var /= total_bins
    alive = [i for i in range(n) if var[i] > 0]
    out = []
    for lag in range(max_lag + 1):
        per_neuron = []
        for i in alive:
            acc = 0.0
            pairs = 0
            for s in samples:
                t = s.shape[1]
                for u in range(t - lag):
                    acc += (s[i, u] - mu[i]) * (s[i, u + lag] - mu[i])
                    pairs += 1
            per_neuron.append((acc / pairs) / var[i])
        out.append(np.mean(per_neuron))
    return np.array(out)


def brute_state_histogram(samples):
    samples = [np.asarray(s) for s in samples]
    n, t = samples[0].shape
    hist = np.zeros(2 ** (n * t))
    for s in samples:
        bits = ""
        for p in range(t):
            for k in range(n):
                bits += "1" if s[k, p] else "0"
        hist[int(bits, 2)] += 1
    return hist / len(samples)
