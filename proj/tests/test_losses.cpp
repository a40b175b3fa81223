#include <doctest.h>

#include <cmath>

#include "xflowdg/errors.hpp"
#include "xflowdg/losses.hpp"

using namespace xflowdg;

namespace {

double nce(const Tensor& zk, const Tensor& zl, double tau) {
    Tape t;
    return t.value(info_nce(t, t.constant(zk), t.constant(zl), tau)).item();
}

// random rotation via Gram-Schmidt on a Gaussian matrix
Tensor random_orthogonal(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    Tensor q = Tensor::normal({n, n}, rng);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            double proj = 0;
            for (std::size_t k = 0; k < n; ++k) proj += q.at(i, k) * q.at(j, k);
            for (std::size_t k = 0; k < n; ++k) q.at(i, k) -= proj * q.at(j, k);
        }
        double norm = 0;
        for (std::size_t k = 0; k < n; ++k) norm += q.at(i, k) * q.at(i, k);
        norm = std::sqrt(norm);
        for (std::size_t k = 0; k < n; ++k) q.at(i, k) /= norm;
    }
    return q;
}

}  // namespace

TEST_CASE("info_nce: N=1 is exactly zero") {
    Tensor z = Tensor::matrix({{0.3, -1.2, 0.5}});
    CHECK(nce(z, z, 0.07) == 0.0);
    CHECK(nce(z, Tensor::matrix({{1.0, 1.0, 1.0}}), 0.5) == 0.0);
}

TEST_CASE("info_nce: identical rows give ln N for any tau") {
    for (std::size_t n : {2, 5, 8}) {
        for (double tau : {0.07, 0.5, 1.0}) {
            Tensor z = Tensor::zeros({n, 4});
            for (std::size_t i = 0; i < n; ++i) {
                z.at(i, 0) = 0.6;
                z.at(i, 2) = -0.8;
            }
            CHECK(std::abs(nce(z, z, tau) - std::log(double(n))) < 1e-10);
        }
    }
}

TEST_CASE("info_nce: N=2 identity basis at tau=1 gives ln(1+exp(-1))") {
    Tensor eye = Tensor::matrix({{1, 0}, {0, 1}});
    double want = std::log(1.0 + std::exp(-1.0));
    CHECK(std::abs(nce(eye, eye, 1.0) - want) < 1e-10);
}

TEST_CASE("info_nce: zero-norm row is rejected") {
    Tensor z = Tensor::matrix({{1, 0}, {0, 0}});
    Tensor ok = Tensor::matrix({{1, 0}, {0, 1}});
    Tape t;
    CHECK_THROWS_AS(info_nce(t, t.constant(z), t.constant(ok), 0.07), ArgumentError);
    Tape t2;
    CHECK_THROWS_AS(info_nce(t2, t2.constant(ok), t2.constant(z), 0.07), ArgumentError);
}

TEST_CASE("info_nce: invariant under rotation and per-row rescaling") {
    Rng rng(5);
    Tensor zk = Tensor::normal({4, 6}, rng);
    Tensor zl = Tensor::normal({4, 6}, rng);
    double base = nce(zk, zl, 0.07);

    Tensor q = random_orthogonal(6, 17);
    double rotated = nce(matmul(zk, q), matmul(zl, q), 0.07);
    CHECK(std::abs(base - rotated) < 1e-10);

    Tensor zk_scaled = zk;
    double factors[4] = {0.3, 2.0, 7.5, 0.01};
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 6; ++j) zk_scaled.at(i, j) *= factors[i];
    CHECK(std::abs(base - nce(zk_scaled, zl, 0.07)) < 1e-10);
}

TEST_CASE("info_nce: improving the positive pair strictly lowers the loss") {
    // two orthogonal pairs; rotate row 0 of zk toward its positive
    Tensor zl = Tensor::matrix({{1, 0, 0}, {0, 1, 0}});
    auto loss_at = [&](double align) {
        Tensor zk = Tensor::matrix({{align, 0, std::sqrt(1 - align * align)}, {0, 1, 0}});
        return nce(zk, zl, 0.2);
    };
    double prev = loss_at(0.1);
    for (double a : {0.3, 0.6, 0.9, 0.99}) {
        double cur = loss_at(a);
        CHECK(cur < prev);
        prev = cur;
    }
}

TEST_CASE("info_nce gradient passes grad_check at a random 4x8 batch") {
    Rng rng(7);
    Tensor zk = Tensor::normal({4, 8}, rng);
    Tensor zl = Tensor::normal({4, 8}, rng);
    double err = grad_check(
        [&](Tape& t, Var v) { return info_nce(t, v, t.constant(zl), 0.1); }, zk);
    CHECK(err < 1e-4);
    double err2 = grad_check(
        [&](Tape& t, Var v) { return info_nce(t, t.constant(zk), v, 0.1); }, zl);
    CHECK(err2 < 1e-4);
}

TEST_CASE("fcl: weight arithmetic over the four pathways") {
    // identical batches make every pathway equal ln N; total = 3 ln N
    Tensor z = Tensor::zeros({3, 4});
    for (std::size_t i = 0; i < 3; ++i) z.at(i, 1) = 1.0;
    Tape t;
    FclParts parts = fcl(t, t.constant(z), t.constant(z), 0.07);
    double lnn = std::log(3.0);
    CHECK(std::abs(t.value(parts.i2t).item() - lnn) < 1e-10);
    CHECK(std::abs(t.value(parts.t2i).item() - lnn) < 1e-10);
    CHECK(std::abs(t.value(parts.t2t).item() - lnn) < 1e-10);
    CHECK(std::abs(t.value(parts.i2i).item() - lnn) < 1e-10);
    CHECK(std::abs(t.value(parts.total).item() - 3.0 * lnn) < 1e-10);
}

TEST_CASE("fcl: N=1 intra terms are zero") {
    Tape t;
    Var zi = t.constant(Tensor::matrix({{1.0, 2.0}}));
    Var zt = t.constant(Tensor::matrix({{-1.0, 0.5}}));
    FclParts parts = fcl(t, zi, zt, 0.07);
    CHECK(t.value(parts.i2i).item() == 0.0);
    CHECK(t.value(parts.t2t).item() == 0.0);
}

TEST_CASE("fcl: inter-only ablation zeroes the intra terms") {
    Rng rng(9);
    Tensor zi = Tensor::normal({4, 6}, rng);
    Tensor zt = Tensor::normal({4, 6}, rng);
    Tape t;
    FclParts full = fcl(t, t.constant(zi), t.constant(zt), 0.07, false);
    double i2t = t.value(full.i2t).item();
    double t2i = t.value(full.t2i).item();
    Tape t2;
    FclParts inter = fcl(t2, t2.constant(zi), t2.constant(zt), 0.07, true);
    CHECK(t2.value(inter.t2t).item() == 0.0);
    CHECK(t2.value(inter.i2i).item() == 0.0);
    CHECK(t2.value(inter.i2t).item() == i2t);
    CHECK(t2.value(inter.t2i).item() == t2i);
    CHECK(t2.value(inter.total).item() == doctest::Approx(i2t + t2i).epsilon(1e-14));
}

TEST_CASE("fcl: invariant under simultaneous batch permutation") {
    Rng rng(11);
    Tensor zi = Tensor::normal({5, 4}, rng);
    Tensor zt = Tensor::normal({5, 4}, rng);
    std::vector<std::size_t> perm = {3, 0, 4, 1, 2};
    Tensor pi = Tensor::zeros({5, 4}), pt = Tensor::zeros({5, 4});
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            pi.at(i, j) = zi.at(perm[i], j);
            pt.at(i, j) = zt.at(perm[i], j);
        }
    Tape a, b;
    double base = a.value(fcl(a, a.constant(zi), a.constant(zt), 0.07).total).item();
    double permuted = b.value(fcl(b, b.constant(pi), b.constant(pt), 0.07).total).item();
    CHECK(std::abs(base - permuted) < 1e-10);
}

TEST_CASE("vae_loss closed forms") {
    Tape t;
    // perfect reconstruction, standard-normal posterior -> 0
    Var x = t.constant(Tensor::matrix({{1.0, 2.0}}));
    Var mu0 = t.constant(Tensor::matrix({{0.0}}));
    Var lv0 = t.constant(Tensor::matrix({{0.0}}));
    CHECK(t.value(vae_loss(t, x, x, mu0, lv0)).item() == 0.0);

    // mu = 1, logvar = 0, one dim -> KL = 0.5
    Tape t2;
    Var x2 = t2.constant(Tensor::matrix({{3.0}}));
    Var mu1 = t2.constant(Tensor::matrix({{1.0}}));
    Var lv1 = t2.constant(Tensor::matrix({{0.0}}));
    CHECK(std::abs(t2.value(vae_loss(t2, x2, x2, mu1, lv1)).item() - 0.5) < 1e-12);

    // logvar = ln 4, mu = 0 -> KL = (4 - 1 - ln 4) / 2
    Tape t3;
    Var x3 = t3.constant(Tensor::matrix({{3.0}}));
    Var mu3 = t3.constant(Tensor::matrix({{0.0}}));
    Var lv4 = t3.constant(Tensor::matrix({{std::log(4.0)}}));
    double want = 0.5 * (4.0 - 1.0 - std::log(4.0));
    CHECK(std::abs(t3.value(vae_loss(t3, x3, x3, mu3, lv4)).item() - want) < 1e-12);

    // reconstruction-only: x = 0, xhat = 2 in one of four coords -> mse = 1
    Tape t4;
    Var xz = t4.constant(Tensor::matrix({{0.0, 0.0, 0.0, 0.0}}));
    Var xh = t4.constant(Tensor::matrix({{2.0, 0.0, 0.0, 0.0}}));
    Var mu4 = t4.constant(Tensor::matrix({{0.0}}));
    Var lv = t4.constant(Tensor::matrix({{0.0}}));
    CHECK(t4.value(vae_loss(t4, xz, xh, mu4, lv)).item() == 1.0);

    // KL averages over the batch: two rows with KL 0.5 each -> 0.5
    Tape t5;
    Var xb = t5.constant(Tensor::matrix({{1.0}, {1.0}}));
    Var mub = t5.constant(Tensor::matrix({{1.0}, {-1.0}}));
    Var lvb = t5.constant(Tensor::matrix({{0.0}, {0.0}}));
    CHECK(std::abs(t5.value(vae_loss(t5, xb, xb, mub, lvb)).item() - 0.5) < 1e-12);
}

TEST_CASE("vae_loss gradient passes grad_check") {
    Rng rng(13);
    Tensor x = Tensor::normal({3, 5}, rng);
    Tensor xh = Tensor::normal({3, 5}, rng);
    Tensor mu = Tensor::normal({3, 4}, rng);
    Tensor lv = Tensor::normal({3, 4}, rng, 0.5);
    CHECK(grad_check([&](Tape& t, Var v) {
              return vae_loss(t, t.constant(x), v, t.constant(mu), t.constant(lv));
          }, xh) < 1e-4);
    CHECK(grad_check([&](Tape& t, Var v) {
              return vae_loss(t, t.constant(x), t.constant(xh), v, t.constant(lv));
          }, mu) < 1e-4);
    CHECK(grad_check([&](Tape& t, Var v) {
              return vae_loss(t, t.constant(x), t.constant(xh), t.constant(mu), v);
          }, lv) < 1e-4);
}

TEST_CASE("flow_matching_loss_at: oracle and zero fields") {
    Rng rng(15);
    Tensor zi = Tensor::normal({4, 6}, rng);
    Tensor zt = Tensor::normal({4, 6}, rng);

    // oracle: field returns exactly z_txt - z_img regardless of input
    Tensor vstar = sub(zt, zi);
    RowVelocityFn oracle = [&](Tape& t, Var, const std::vector<double>&) {
        return t.constant(vstar);
    };
    Tape t;
    Var loss = flow_matching_loss_at(t, oracle, t.constant(zi), t.constant(zt),
                                     {0.1, 0.5, 0.9, 0.3});
    CHECK(t.value(loss).item() == 0.0);

    // zero field with unit-distance pairs: loss = mean ||v*||^2 = 1
    Tensor a = Tensor::zeros({3, 4});
    Tensor b = Tensor::zeros({3, 4});
    for (std::size_t i = 0; i < 3; ++i) b.at(i, i) = 1.0;  // each pair distance 1
    RowVelocityFn zero_field = [](Tape& t, Var z, const std::vector<double>&) {
        return t.scale(z, 0.0);
    };
    Tape t2;
    Var l2 = flow_matching_loss_at(t2, zero_field, t2.constant(a), t2.constant(b),
                                   {0.2, 0.6, 0.8});
    CHECK(t2.value(l2).item() == 1.0);
}

TEST_CASE("flow_matching_loss_at: t=0 and t=1 probe the endpoints") {
    // stub field that records what z it was evaluated at
    Tensor zi = Tensor::matrix({{1.0, 0.0}});
    Tensor zt = Tensor::matrix({{0.0, 1.0}});
    Tensor seen;
    RowVelocityFn probe = [&](Tape& t, Var z, const std::vector<double>&) {
        seen = t.value(z);
        return t.scale(z, 0.0);
    };
    Tape t;
    flow_matching_loss_at(t, probe, t.constant(zi), t.constant(zt), {0.0});
    CHECK(seen.at(0, 0) == 1.0);  // z_0 = z_img
    CHECK(seen.at(0, 1) == 0.0);
    Tape t2;
    flow_matching_loss_at(t2, probe, t2.constant(zi), t2.constant(zt), {1.0});
    CHECK(seen.at(0, 0) == 0.0);  // z_1 = z_txt
    CHECK(seen.at(0, 1) == 1.0);
}

TEST_CASE("flow_matching_loss: rng draw count and determinism") {
    Rng init(17);
    FlowFieldNet net("flow", 6, 8, 2, init);
    Rng data(18);
    Tensor zi = Tensor::normal({4, 6}, data);
    Tensor zt = Tensor::normal({4, 6}, data);
    auto run = [&](std::uint64_t seed) {
        Rng r(seed);
        Tape t;
        return t.value(flow_matching_loss(t, net, t.constant(zi), t.constant(zt), r)).item();
    };
    CHECK(run(5) == run(5));
    // zero net at init: loss = mean ||v*||^2 regardless of the t draws
    double want = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < 6; ++j) {
            double d = zt.at(i, j) - zi.at(i, j);
            s += d * d;
        }
        want += s;
    }
    want /= 4.0;
    CHECK(run(5) == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("flow_matching_loss gradient w.r.t. theta at fixed t draws") {
    Rng init(19);
    FlowFieldNet net("flow", 5, 8, 2, init);
    Rng perturb(20);
    net.out_proj.W.value = Tensor::normal(net.out_proj.W.value.shape(), perturb, 0.1);
    Rng data(21);
    Tensor zi = Tensor::normal({3, 5}, data);
    Tensor zt = Tensor::normal({3, 5}, data);
    std::vector<double> ts = {0.25, 0.5, 0.75};
    RowVelocityFn field = [&](Tape& t, Var z, const std::vector<double>& tv) {
        return net.apply(t, z, tv);
    };
    auto build = [&](Tape& t) {
        return flow_matching_loss_at(t, field, t.constant(zi), t.constant(zt), ts);
    };
    CHECK(grad_check_param(build, net.in_proj.W) < 1e-4);
    CHECK(grad_check_param(build, net.out_proj.W) < 1e-4);
    CHECK(grad_check_param(build, net.blocks[0].first.b) < 1e-4);
}

TEST_CASE("mse_mapping_loss: identity and zero mappers") {
    Rng init(23);
    MseMapper m("map", 5, 8, 2, init);  // zero-init output => identity map
    Rng data(24);
    Tensor z = Tensor::normal({3, 5}, data);
    Tape t;
    // identity mapper with Z_img = Z_txt -> 0
    CHECK(t.value(mse_mapping_loss(t, m, t.constant(z), t.constant(z))).item() == 0.0);

    // mean ||map(zi) - zt||^2 per row with map = identity: mean row distance^2
    Tensor zt = Tensor::normal({3, 5}, data);
    Tape t2;
    double got = t2.value(mse_mapping_loss(t2, m, t2.constant(z), t2.constant(zt))).item();
    double want = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < 5; ++j) {
            double d = z.at(i, j) - zt.at(i, j);
            s += d * d;
        }
        want += s;
    }
    want /= 3.0;
    CHECK(got == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("mse_mapping_loss gradient passes grad_check") {
    Rng init(25);
    MseMapper m("map", 4, 6, 1, init);
    Rng perturb(26);
    m.out_proj.W.value = Tensor::normal(m.out_proj.W.value.shape(), perturb, 0.1);
    Rng data(27);
    Tensor zi = Tensor::normal({2, 4}, data);
    Tensor zt = Tensor::normal({2, 4}, data);
    auto build = [&](Tape& t) {
        return mse_mapping_loss(t, m, t.constant(zi), t.constant(zt));
    };
    CHECK(grad_check_param(build, m.in_proj.W) < 1e-4);
    CHECK(grad_check_param(build, m.out_proj.W) < 1e-4);
}

TEST_CASE("cross_entropy closed forms") {
    // uniform logits, C = 10 -> ln 10
    Tape t;
    Var uniform = t.constant(Tensor::zeros({3, 10}));
    double got = t.value(cross_entropy(t, uniform, {0, 5, 9})).item();
    CHECK(std::abs(got - std::log(10.0)) < 1e-10);

    // +50 offset at the true class saturates to ~0
    Tensor dom = Tensor::zeros({2, 4});
    dom.at(0, 2) = 50.0;
    dom.at(1, 0) = 50.0;
    Tape t2;
    CHECK(t2.value(cross_entropy(t2, t2.constant(dom), {2, 0})).item() < 1e-10);

    // N=2 hand case: logits [[1,0],[0,1]], labels [0,1] -> ln(1+e^{-1})
    Tape t3;
    Var l = t3.constant(Tensor::matrix({{1, 0}, {0, 1}}));
    double want = std::log(1.0 + std::exp(-1.0));
    CHECK(std::abs(t3.value(cross_entropy(t3, l, {0, 1})).item() - want) < 1e-10);

    // label out of range
    Tape t4;
    Var l4 = t4.constant(Tensor::zeros({1, 3}));
    CHECK_THROWS_AS(cross_entropy(t4, l4, {3}), ArgumentError);
    Tape t5;
    Var l5 = t5.constant(Tensor::zeros({2, 3}));
    CHECK_THROWS_AS(cross_entropy(t5, l5, {0}), ArgumentError);  // label count mismatch
}

TEST_CASE("cross_entropy gradient passes grad_check") {
    Rng rng(29);
    Tensor logits = Tensor::normal({4, 6}, rng);
    CHECK(grad_check([&](Tape& t, Var v) {
              return cross_entropy(t, v, {2, 0, 5, 3});
          }, logits) < 1e-4);
}

TEST_CASE("total_loss: weighted sum and linearity") {
    LossWeights w;  // reference weights
    LossParts unit{1, 1, 1, 1, 1};
    CHECK(std::abs(total_loss(unit, w) - 11.3) < 1e-12);

    LossWeights zero{0, 0, 0, 0, 0};
    CHECK(total_loss(unit, zero) == 0.0);

    LossWeights doubled{0.6, 0.6, 0.6, 0.8, 20.0};
    LossParts parts{0.2, 1.7, 3.1, 0.9, 0.05};
    CHECK(total_loss(parts, doubled) == doctest::Approx(2 * total_loss(parts, w)).epsilon(1e-14));

    LossWeights bad{-0.1, 0, 0, 0, 0};
    CHECK_THROWS_AS(bad.check_valid(), ArgumentError);
}

TEST_CASE("total_loss: tape form matches the value form bitwise") {
    LossWeights w;
    LossParts parts{0.25, 1.5, 2.75, 0.125, 3.5};
    Tape t;
    Var total = total_loss(t, t.constant(Tensor::scalar(parts.vae_img)),
                           t.constant(Tensor::scalar(parts.vae_txt)),
                           t.constant(Tensor::scalar(parts.fc)),
                           t.constant(Tensor::scalar(parts.fm)),
                           t.constant(Tensor::scalar(parts.ce)), w);
    CHECK(t.value(total).item() == total_loss(parts, w));
}
