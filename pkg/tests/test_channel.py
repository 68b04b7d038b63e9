"""Channel model: parsing, derived channels, products, classical reduction."""

import json

import numpy as np
import pytest

from gpcq.causal import classical_channel_capacity
from gpcq.channel import (
    RandomizedEncoder,
    build_channel,
    classical_embedding,
    conditional_derived_channel,
    derived_channel,
    parse_channel,
    product_extension,
    serialize_channel,
)
from gpcq.errors import BudgetExceeded, ParseError, TraceNotOne
from gpcq.quantum import holevo_quantity, shannon_entropy

KET0 = np.diag([1.0, 0.0]).astype(complex)
KET1 = np.diag([0.0, 1.0]).astype(complex)
PLUS = np.full((2, 2), 0.5, dtype=complex)


def xor_encoder() -> RandomizedEncoder:
    """phi(s, u) = u xor s as a deterministic kernel."""
    kernel = np.zeros((2, 2, 2))
    for s in range(2):
        for u in range(2):
            kernel[s, u, (s + u) % 2] = 1.0
    return RandomizedEncoder(2, kernel)


class TestParseSerialize:
    def test_round_trip_bit_exact(self, flip):
        text = serialize_channel(flip)
        again = serialize_channel(parse_channel(text))
        assert text == again

    def test_round_trip_all_channels(self, suite):
        for ch in suite.values():
            text = serialize_channel(ch)
            back = parse_channel(text)
            assert back.state_alphabet == ch.state_alphabet
            assert back.input_alphabet == ch.input_alphabet
            for key, mat in ch.states.items():
                assert np.array_equal(back.states[key], mat)

    def test_missing_state_entry(self, flip):
        doc = json.loads(serialize_channel(flip))
        del doc["rho"]["1|0"]
        with pytest.raises(ParseError, match=r"missing state \(1,0\)"):
            parse_channel(json.dumps(doc))

    def test_bad_trace_reported_with_location(self, flip):
        doc = json.loads(serialize_channel(flip))
        doc["rho"]["0|0"][0][0] = [0.9, 0.0]
        with pytest.raises(TraceNotOne, match=r"rho\[0\|0\]"):
            parse_channel(json.dumps(doc))

    def test_zero_mass_state_stripped_with_warning(self):
        ch = build_channel(
            "01",
            "01",
            2,
            {
                (s, x): (KET0 if (int(s) + int(x)) % 2 == 0 else KET1)
                for s in "01"
                for x in "01"
            },
            [1.0, 0.0],
        )
        assert ch.state_alphabet == ("0",)
        assert any("'1'" in w and "zero probability" in w for w in ch.warnings)


class TestDerivedChannel:
    def test_state_independent(self):
        states = {(s, x): (KET0 if x == "0" else PLUS) for s in "01" for x in "01"}
        ch = build_channel("01", "01", 2, states, [0.5, 0.5])
        enc = RandomizedEncoder(2, np.stack([np.eye(2)] * 2))
        out = derived_channel(ch, enc)
        assert np.allclose(out[0], KET0, atol=1e-12)
        assert np.allclose(out[1], PLUS, atol=1e-12)

    def test_kernel_ignoring_u(self, flip):
        kernel = np.zeros((2, 2, 2))
        kernel[:, :, 0] = 1.0
        out = derived_channel(flip, RandomizedEncoder(2, kernel))
        assert np.allclose(out[0], out[1], atol=1e-12)
        assert holevo_quantity(np.array([0.5, 0.5]), out) == pytest.approx(0.0, abs=1e-12)

    def test_flip_xor_inversion(self, flip):
        out = derived_channel(flip, xor_encoder())
        assert np.allclose(out[0], KET0, atol=1e-12)
        assert np.allclose(out[1], KET1, atol=1e-12)

    def test_conditional_variant_skips_state_average(self, flip):
        cond = conditional_derived_channel(flip, xor_encoder())
        for s in range(2):
            for u in range(2):
                expected = KET0 if u == 0 else KET1
                assert np.allclose(cond[s, u], expected, atol=1e-12)

    def test_product_kernel_commutes_with_extension(self, flip):
        enc = xor_encoder()
        single = derived_channel(flip, enc)
        ch2 = product_extension(flip, 2)
        kernel2 = np.einsum("sux,tvy->stuvxy", enc.kernel, enc.kernel).reshape(4, 4, 4)
        pair = derived_channel(ch2, RandomizedEncoder(4, kernel2))
        for u in range(2):
            for v in range(2):
                expected = np.kron(single[u], single[v])
                assert np.allclose(pair[2 * u + v], expected, atol=1e-12)


class TestProductExtension:
    def test_identity_at_one(self, stuck):
        same = product_extension(stuck, 1)
        assert same.state_alphabet == stuck.state_alphabet
        for key, mat in stuck.states.items():
            assert np.array_equal(same.states[key], mat)

    def test_two_fold_kron(self, flip):
        ch2 = product_extension(flip, 2)
        assert ch2.dim == 4
        assert len(ch2.state_alphabet) == 4
        got = ch2.states[("0:1", "1:0")]
        expected = np.kron(flip.states[("0", "1")], flip.states[("1", "0")])
        assert np.allclose(got, expected, atol=1e-15)
        assert np.allclose(ch2.p.probs, 0.25)

    def test_all_product_traces_one(self, purecq):
        ch2 = product_extension(purecq, 2)
        for mat in ch2.states.values():
            assert np.trace(mat).real == pytest.approx(1.0, abs=1e-12)

    def test_budget_guard(self, flip):
        with pytest.raises(BudgetExceeded):
            product_extension(flip, 4, budget_bytes=1024)

    def test_env_override(self, flip, monkeypatch):
        monkeypatch.setenv("GPCQ_BUDGET_BYTES", "1024")
        with pytest.raises(BudgetExceeded):
            product_extension(flip, 4)


class TestClassicalEmbedding:
    def test_diagonal_channel(self, flip):
        emb = classical_embedding(flip)
        assert emb.classical
        for (s, x), row in emb.table.items():
            assert np.allclose(row, np.real(np.diag(flip.states[(s, x)])), atol=1e-12)

    def test_noncommuting_pair(self):
        states = {("0", "a"): KET0, ("0", "b"): PLUS}
        ch = build_channel(["0"], ["a", "b"], 2, states, [1.0])
        emb = classical_embedding(ch)
        assert not emb.classical
        assert emb.max_commutator_norm == pytest.approx(0.5, abs=1e-12)

    def test_single_state_channel(self):
        ch = build_channel(["0"], ["a"], 2, {("0", "a"): PLUS}, [1.0])
        assert classical_embedding(ch).classical

    def test_purecq_not_classical(self, purecq):
        assert not classical_embedding(purecq).classical

    def test_holevo_equals_mutual_information_on_diagonals(self, stuck):
        # Feed the classical table back through the Shannon formula; the
        # Holevo quantity of diagonal ensembles must match exactly.
        emb = classical_embedding(stuck)
        assert emb.classical
        enc = RandomizedEncoder(2, np.stack([np.eye(2)] * 2))
        ens = derived_channel(stuck, enc)
        q = np.array([0.4, 0.6])
        w = np.stack(
            [
                sum(
                    stuck.p.probs[i] * np.asarray(emb.table[(s, x)])
                    for i, s in enumerate(stuck.state_alphabet)
                )
                for x in stuck.input_alphabet
            ]
        )
        out = q @ w
        mutual = shannon_entropy(out) - sum(q[x] * shannon_entropy(w[x]) for x in range(2))
        assert holevo_quantity(q, ens) == pytest.approx(mutual, abs=1e-9)

    def test_classical_capacity_cross_check(self, flip):
        # The state-averaged flip channel is a binary symmetric channel with
        # crossover 1/2 and zero capacity.
        emb = classical_embedding(flip)
        w = np.stack(
            [
                sum(
                    flip.p.probs[i] * np.asarray(emb.table[(s, x)])
                    for i, s in enumerate(flip.state_alphabet)
                )
                for x in flip.input_alphabet
            ]
        )
        assert classical_channel_capacity(w) == pytest.approx(0.0, abs=1e-6)
