import numpy as np
import pytest
from scipy.stats import chisquare

from interlink.data import Triplet
from interlink.errors import DataError
from interlink.rescal import (
    NegativeSampler,
    SparseGradient,
    frobenius_reg_gradient,
    init_model,
    load_checkpoint,
    margin_loss,
    ranking_gradients,
    save_checkpoint,
    score,
)

from synth import central_difference, relative_error


class TestInit:
    def test_slot_count_with_common(self, small_pair):
        model = init_model(small_pair, d=4, seed=0)
        n_common = len(small_pair.common)
        assert model.n_slots == small_pair.n1 + small_pair.n2 - n_common

    def test_slot_count_without_common(self, small_pair):
        pair = small_pair
        pair_no_common = type(pair)(
            vocab1=pair.vocab1, vocab2=pair.vocab2, predicates=pair.predicates,
            common=[], train1=pair.train1, train2=pair.train2,
            intra_test=pair.intra_test, inter_valid=pair.inter_valid,
            inter_test=pair.inter_test,
        )
        model = init_model(pair_no_common, d=4, seed=0)
        assert model.n_slots == pair.n1 + pair.n2

    def test_same_seed_bit_identical(self, small_pair):
        a = init_model(small_pair, d=6, seed=42)
        b = init_model(small_pair, d=6, seed=42)
        assert a == b

    def test_tying_structure(self, small_pair):
        model = init_model(small_pair, d=4, seed=0)
        for i, j in small_pair.common:
            assert model.map1[i] == model.map2[j]

    def test_bad_dimension(self, small_pair):
        with pytest.raises(DataError):
            init_model(small_pair, d=0, seed=0)


class TestScore:
    def make_model(self, small_pair, d, seed=0):
        return init_model(small_pair, d=d, seed=seed)

    def test_identity_case(self, small_pair):
        model = self.make_model(small_pair, d=2)
        model.slots[model.map1[0]] = [1.0, 0.0]
        model.slots[model.map1[1]] = [1.0, 0.0]
        model.relations[0] = np.eye(2)
        assert score(model, (1, 0), 0, (1, 1)) == pytest.approx(1.0)

    def test_direct_arithmetic(self, small_pair):
        model = self.make_model(small_pair, d=2)
        model.slots[model.map1[0]] = [1.0, 2.0]
        model.slots[model.map1[1]] = [3.0, 4.0]
        model.relations[0] = np.array([[0.0, 1.0], [0.0, 0.0]])
        # (1,2) . (R @ (3,4)) = (1,2) . (4,0) = 4
        assert score(model, (1, 0), 0, (1, 1)) == pytest.approx(4.0)

    def test_matches_triple_product_oracle(self, small_pair, rng):
        model = self.make_model(small_pair, d=6, seed=3)
        for _ in range(20):
            h = int(rng.integers(small_pair.n1))
            t = int(rng.integers(small_pair.n2))
            k = int(rng.integers(small_pair.num_predicates))
            a_h = model.slots[model.map1[h]]
            a_t = model.slots[model.map2[t]]
            expected = sum(
                a_h[i] * model.relations[k][i, j] * a_t[j]
                for i in range(6)
                for j in range(6)
            )
            assert score(model, (1, h), k, (2, t)) == pytest.approx(
                expected, abs=1e-12
            )

    def test_bilinearity(self, small_pair):
        model = self.make_model(small_pair, d=5, seed=1)
        base = score(model, (1, 0), 0, (2, 1))
        model.slots[model.map1[0]] *= 3.0
        assert score(model, (1, 0), 0, (2, 1)) == pytest.approx(3.0 * base)

    def test_out_of_range(self, small_pair):
        model = self.make_model(small_pair, d=2)
        with pytest.raises(DataError):
            score(model, (1, 10 ** 6), 0, (1, 0))
        with pytest.raises(DataError):
            score(model, (1, 0), 10 ** 6, (1, 0))


class TestMarginLoss:
    def test_margin_satisfied(self):
        assert margin_loss(2.0, 0.5) == 0.0

    def test_equal_scores(self):
        assert margin_loss(1.5, 1.5) == 1.0

    def test_direct_arithmetic(self):
        assert margin_loss(0.0, 0.3) == pytest.approx(1.3)


class TestNegativeSampler:
    def test_only_option(self):
        sampler = NegativeSampler(2, 2, seed=0)
        neg = sampler.sample(Triplet(0, 0, 1), domain=1, which="head")
        assert neg == Triplet(1, 0, 1)

    def test_uniformity_chi_square(self):
        n = 20
        sampler = NegativeSampler(n, n, seed=1)
        counts = np.zeros(n)
        draws = 100_000
        pos = Triplet(0, 0, 1)
        for _ in range(draws):
            neg = sampler.sample(pos, domain=1, which="tail")
            counts[neg.tail] += 1
        # tail=1 is excluded by resampling
        observed = np.delete(counts, 1)
        _, p = chisquare(observed)
        assert p > 1e-4

    def test_never_crosses_domain(self, small_pair):
        sampler = NegativeSampler(small_pair.n1, small_pair.n2, seed=2)
        pos = Triplet(0, 0, 1)
        for _ in range(10_000):
            neg = sampler.corrupt(pos, domain=2)
            assert 0 <= neg.head < small_pair.n2
            assert 0 <= neg.tail < small_pair.n2

    def test_differs_in_exactly_one_slot(self):
        sampler = NegativeSampler(10, 10, seed=3)
        pos = Triplet(4, 1, 7)
        for _ in range(200):
            neg = sampler.corrupt(pos, domain=1)
            changed = (neg.head != pos.head) + (neg.tail != pos.tail)
            assert changed == 1 and neg.predicate == pos.predicate

    def test_degenerate_domain(self):
        sampler = NegativeSampler(1, 5, seed=0)
        with pytest.raises(DataError):
            sampler.sample(Triplet(0, 0, 0), domain=1, which="head")


def full_loss(model, pos, neg, domain):
    sm = model.slot_map(domain)
    r = model.relations[pos.predicate]
    f_pos = model.slots[sm[pos.head]] @ r @ model.slots[sm[pos.tail]]
    f_neg = model.slots[sm[neg.head]] @ r @ model.slots[sm[neg.tail]]
    return margin_loss(float(f_pos), float(f_neg))


class TestRankingGradients:
    def test_inactive_margin_zero(self, small_pair):
        model = init_model(small_pair, d=3, seed=0)
        pos = Triplet(0, 0, 1)
        neg = Triplet(2, 0, 1)
        # push the positive score far above the negative
        model.slots[model.map1[pos.head]] = np.array([10.0, 0.0, 0.0])
        model.slots[model.map1[pos.tail]] = np.array([10.0, 0.0, 0.0])
        model.slots[model.map1[neg.head]] = np.array([-10.0, 0.0, 0.0])
        model.relations[0] = np.eye(3)
        loss, grad = ranking_gradients(model, pos, neg, domain=1)
        assert loss == 0.0
        assert grad.is_zero()

    def test_matches_finite_differences(self, small_pair, rng):
        d = 3
        for trial in range(20):
            model = init_model(small_pair, d=d, seed=trial)
            pos = Triplet(int(rng.integers(small_pair.n1)), 0,
                          int(rng.integers(small_pair.n1)))
            neg = Triplet(int(rng.integers(small_pair.n1)), 0, pos.tail)
            loss, grad = ranking_gradients(model, pos, neg, domain=1)
            if loss <= 0 or abs(1.0 + _f(model, neg, 1) - _f(model, pos, 1)) < 1e-3:
                continue  # inactive or too close to the kink for differencing

            def loss_of_slots(slots, model=model, pos=pos, neg=neg):
                saved = model.slots
                model.slots = slots
                value = full_loss(model, pos, neg, 1)
                model.slots = saved
                return value

            fd_slots = central_difference(loss_of_slots, model.slots)
            analytic = np.zeros_like(model.slots)
            for s, g in grad.rows.items():
                analytic[s] += g
            assert relative_error(analytic, fd_slots) < 1e-4

            def loss_of_rel(r, model=model, pos=pos, neg=neg):
                saved = model.relations[0].copy()
                model.relations[0] = r
                value = full_loss(model, pos, neg, 1)
                model.relations[0] = saved
                return value

            fd_rel = central_difference(loss_of_rel, model.relations[0])
            assert relative_error(grad.relations[0], fd_rel) < 1e-4

    def test_shared_head_linearity(self, small_pair):
        model = init_model(small_pair, d=4, seed=5)
        pos = Triplet(0, 0, 1)
        neg = Triplet(0, 0, 2)  # same head entity
        loss, grad = ranking_gradients(model, pos, neg, domain=1)
        if loss > 0:
            r = model.relations[0]
            expected = r @ model.slots[model.map1[2]] - r @ model.slots[model.map1[1]]
            head_slot = int(model.map1[0])
            np.testing.assert_allclose(grad.rows[head_slot], expected, atol=1e-12)

    def test_predicate_mismatch_rejected(self, small_pair):
        model = init_model(small_pair, d=3, seed=0)
        with pytest.raises(DataError):
            ranking_gradients(model, Triplet(0, 0, 1), Triplet(0, 1, 1), domain=1)


def _f(model, trip, domain):
    sm = model.slot_map(domain)
    return float(
        model.slots[sm[trip.head]]
        @ model.relations[trip.predicate]
        @ model.slots[sm[trip.tail]]
    )


class TestFrobeniusGradient:
    def test_zero_mu(self, small_pair):
        model = init_model(small_pair, d=3, seed=0)
        grad = frobenius_reg_gradient(model, 0.0, slots=[0, 1], relations=[0])
        assert grad.is_zero()

    def test_direct_arithmetic(self, small_pair):
        model = init_model(small_pair, d=2, seed=0)
        model.slots[0] = np.array([1.0, -1.0])
        grad = frobenius_reg_gradient(model, 2.0, slots=[0])
        np.testing.assert_allclose(grad.rows[0], [2.0, -2.0])

    def test_matches_finite_differences(self, small_pair):
        model = init_model(small_pair, d=4, seed=2)
        mu = 0.7
        grad = frobenius_reg_gradient(model, mu, slots=[1], relations=[0])

        def reg_of_row(row):
            return 0.5 * mu * float(np.sum(row ** 2))

        fd = central_difference(reg_of_row, model.slots[1].copy())
        np.testing.assert_allclose(grad.rows[1], fd, atol=1e-6)
        fd_rel = central_difference(reg_of_row, model.relations[0].copy())
        np.testing.assert_allclose(grad.relations[0], fd_rel, atol=1e-6)

    def test_negative_mu_rejected(self, small_pair):
        model = init_model(small_pair, d=2, seed=0)
        with pytest.raises(DataError):
            frobenius_reg_gradient(model, -1.0)


class TestSparseGradient:
    def test_accumulation(self):
        g = SparseGradient()
        g.add_row(3, np.array([1.0, 2.0]))
        g.add_row(3, np.array([0.5, 0.5]))
        np.testing.assert_allclose(g.rows[3], [1.5, 2.5])

    def test_does_not_alias_input(self):
        g = SparseGradient()
        v = np.array([1.0, 1.0])
        g.add_row(0, v)
        v[0] = 99.0
        assert g.rows[0][0] == 1.0


class TestCheckpoint:
    def test_round_trip_exact(self, small_pair, tmp_path):
        model = init_model(small_pair, d=5, seed=11)
        path = str(tmp_path / "ckpt.txt")
        save_checkpoint(model, path)
        loaded = load_checkpoint(path)
        assert loaded == model

    def test_truncated_rejected(self, small_pair, tmp_path):
        model = init_model(small_pair, d=3, seed=0)
        path = tmp_path / "ckpt.txt"
        save_checkpoint(model, str(path))
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:3]))
        with pytest.raises(DataError):
            load_checkpoint(str(path))
