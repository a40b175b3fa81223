#include <doctest.h>

#include <cmath>

#include "xflowdg/errors.hpp"
#include "xflowdg/models.hpp"

using namespace xflowdg;

TEST_CASE("reparameterize: vanishing variance limit") {
    Rng rng(1);
    Tensor mu = Tensor::normal({1, 16}, rng);
    Tensor logvar = Tensor::full({1, 16}, -40.0);
    Tensor eps = Tensor::normal({1, 16}, rng);
    Tensor z = reparameterize(mu, logvar, eps);
    for (std::size_t i = 0; i < z.size(); ++i)
        CHECK(std::abs(z[i] - mu[i]) < 1e-8);
}

TEST_CASE("reparameterize: unit variance moves by eps") {
    Tensor mu = Tensor::vector({1.0, 2.0});
    Tensor logvar = Tensor::zeros({2});
    Tensor eps = Tensor::vector({0.5, -0.25});
    Tensor z = reparameterize(mu, logvar, eps);
    CHECK(z[0] == 1.5);
    CHECK(z[1] == 1.75);
}

TEST_CASE("vae encode: mean mode is deterministic, sample mode is seeded") {
    Rng init(3);
    VaeHead head("vae", 12, 16, 8, init);
    Rng data(4);
    Tensor x = Tensor::normal({3, 12}, data);

    auto run_mean = [&]() {
        Tape t;
        auto enc = head.encode(t, t.constant(x), EncodeMode::Mean, nullptr);
        return t.value(enc.z);
    };
    Tensor z1 = run_mean(), z2 = run_mean();
    for (std::size_t i = 0; i < z1.size(); ++i) CHECK(z1[i] == z2[i]);

    auto run_sample = [&](std::uint64_t seed) {
        Tape t;
        Rng r(seed);
        auto enc = head.encode(t, t.constant(x), EncodeMode::Sample, &r);
        return t.value(enc.z);
    };
    Tensor s1 = run_sample(7), s2 = run_sample(7), s3 = run_sample(8);
    bool same = true, diff = false;
    for (std::size_t i = 0; i < s1.size(); ++i) {
        same &= (s1[i] == s2[i]);
        diff |= (s1[i] != s3[i]);
    }
    CHECK(same);
    CHECK(diff);

    // sample differs from mean (nonzero variance at init)
    bool moved = false;
    for (std::size_t i = 0; i < s1.size(); ++i) moved |= (s1[i] != z1[i]);
    CHECK(moved);

    // logvar is clamped
    Tape t;
    auto enc = head.encode(t, t.constant(x), EncodeMode::Mean, nullptr);
    Tensor lv = t.value(enc.logvar);
    for (std::size_t i = 0; i < lv.size(); ++i) {
        CHECK(lv[i] >= -10.0);
        CHECK(lv[i] <= 10.0);
    }
}

TEST_CASE("vae decode: shape contract and round shape") {
    Rng init(5);
    VaeHead head("vae", 20, 16, 8, init);
    Rng data(6);
    Tensor x = Tensor::normal({4, 20}, data);
    Tape t;
    auto enc = head.encode(t, t.constant(x), EncodeMode::Mean, nullptr);
    Var xhat = head.decode(t, enc.z);
    CHECK(t.value(enc.z).shape() == std::vector<std::size_t>{4, 8});
    CHECK(t.value(xhat).shape() == std::vector<std::size_t>{4, 20});
}

TEST_CASE("zero-weight decoder emits zero") {
    Rng init(5);
    VaeHead head("vae", 6, 8, 4, init);
    head.dec_out.W.value = Tensor::zeros(head.dec_out.W.value.shape());
    head.dec_out.b.value = Tensor::zeros(head.dec_out.b.value.shape());
    Tape t;
    Rng data(2);
    Var z = t.constant(Tensor::normal({2, 4}, data));
    Tensor xhat = t.value(head.decode(t, z));
    for (std::size_t i = 0; i < xhat.size(); ++i) CHECK(xhat[i] == 0.0);
}

TEST_CASE("decoder reconstruction gradient passes grad_check") {
    Rng init(11);
    VaeHead head("vae", 6, 8, 4, init);
    Rng data(12);
    Tensor x = Tensor::normal({2, 6}, data);
    Tensor z = Tensor::normal({2, 4}, data);
    double err = grad_check_param(
        [&](Tape& t) {
            Var xv = t.constant(x);
            Var diff = t.sub(xv, head.decode(t, t.constant(z)));
            return t.mean(t.mul(diff, diff));
        },
        head.dec1.W);
    CHECK(err < 1e-4);
    double err2 = grad_check_param(
        [&](Tape& t) {
            Var xv = t.constant(x);
            Var diff = t.sub(xv, head.decode(t, t.constant(z)));
            return t.mean(t.mul(diff, diff));
        },
        head.dec_out.W);
    CHECK(err2 < 1e-4);
}

TEST_CASE("time features: scalar plus 8 sinusoids") {
    auto f = time_features(0.0);
    REQUIRE(f.size() == 9);
    CHECK(f[0] == 0.0);
    for (std::size_t k = 1; k < 9; ++k) CHECK(f[k] == 0.0);  // sin(0) = 0
    auto h = time_features(0.5);
    CHECK(h[0] == 0.5);
    CHECK(h[1] == doctest::Approx(1.0));         // sin(pi/2)
    CHECK(std::abs(h[2]) < 1e-12);               // sin(pi)
    Tensor rows = time_feature_rows({0.0, 0.5});
    REQUIRE(rows.shape() == std::vector<std::size_t>{2, 9});
    CHECK(rows.at(1, 0) == 0.5);
}

TEST_CASE("flow velocity: deterministic, time-sensitive, zero at init") {
    Rng init(21);
    FlowFieldNet net("flow", 8, 16, 2, init);
    Rng data(22);
    Tensor z = Tensor::normal({3, 8}, data);

    // final layer zero-initialized -> initial velocity is identically zero
    Tensor v0 = net.velocity(z, 0.3);
    for (std::size_t i = 0; i < v0.size(); ++i) CHECK(v0[i] == 0.0);

    // perturb the output layer so the field is nonzero, then check conditioning
    Rng perturb(23);
    net.out_proj.W.value = Tensor::normal(net.out_proj.W.value.shape(), perturb, 0.1);

    Tensor a1 = net.velocity(z, 0.0);
    Tensor a2 = net.velocity(z, 0.0);
    for (std::size_t i = 0; i < a1.size(); ++i) CHECK(a1[i] == a2[i]);

    Tensor b = net.velocity(z, 1.0);
    bool differs = false;
    for (std::size_t i = 0; i < a1.size(); ++i) differs |= (a1[i] != b[i]);
    CHECK(differs);

    // t outside [0,1] is rejected
    CHECK_THROWS_AS(net.velocity(z, -0.1), ArgumentError);
    CHECK_THROWS_AS(net.velocity(z, 1.1), ArgumentError);

    // ablation hook: disabling time conditioning makes the field constant in t
    net.time_conditioned = false;
    Tensor c0 = net.velocity(z, 0.0);
    Tensor c1 = net.velocity(z, 1.0);
    for (std::size_t i = 0; i < c0.size(); ++i) CHECK(c0[i] == c1[i]);
}

TEST_CASE("flow tape forward matches value-level forward bitwise") {
    Rng init(31);
    FlowFieldNet net("flow", 8, 16, 2, init);
    Rng perturb(32);
    net.out_proj.W.value = Tensor::normal(net.out_proj.W.value.shape(), perturb, 0.1);
    Rng data(33);
    Tensor z = Tensor::normal({4, 8}, data);
    Tape t;
    Tensor tape_v = t.value(net.apply(t, t.constant(z), 0.37));
    Tensor val_v = net.velocity(z, 0.37);
    REQUIRE(tape_v.size() == val_v.size());
    for (std::size_t i = 0; i < tape_v.size(); ++i) CHECK(tape_v[i] == val_v[i]);
}

TEST_CASE("flow velocity gradient w.r.t. parameters passes grad_check") {
    Rng init(41);
    FlowFieldNet net("flow", 6, 8, 2, init);
    Rng perturb(42);
    net.out_proj.W.value = Tensor::normal(net.out_proj.W.value.shape(), perturb, 0.1);
    Rng data(43);
    Tensor z = Tensor::normal({2, 6}, data);
    auto build = [&](Tape& t) {
        Var v = net.apply(t, t.constant(z), 0.6);
        return t.sum(t.mul(v, v));
    };
    CHECK(grad_check_param(build, net.in_proj.W) < 1e-4);
    CHECK(grad_check_param(build, net.blocks[0].first.W) < 1e-4);
    CHECK(grad_check_param(build, net.blocks[1].second.W) < 1e-4);
    CHECK(grad_check_param(build, net.out_proj.W) < 1e-4);
}

TEST_CASE("classifier: tie rule and equivariance") {
    CHECK(predict(Tensor::matrix({{0.5, 0.5, 0.5}})) == std::vector<std::uint32_t>{0});
    CHECK(predict(Tensor::matrix({{0, 9, 1}})) == std::vector<std::uint32_t>{1});
    // permuting logits permutes the prediction
    Tensor l = Tensor::matrix({{0.1, 0.9, 0.3}});
    Tensor p = Tensor::matrix({{0.9, 0.3, 0.1}});
    CHECK(predict(l)[0] == 1);
    CHECK(predict(p)[0] == 0);
    // batch form
    auto preds = predict(Tensor::matrix({{1, 2}, {2, 1}, {3, 3}}));
    CHECK(preds == std::vector<std::uint32_t>{1, 0, 0});
}

TEST_CASE("classifier tape and value forwards agree bitwise") {
    Rng init(51);
    ClassifierHead cls("cls", 8, 12, 4, init);
    Rng data(52);
    Tensor z = Tensor::normal({3, 8}, data);
    Tape t;
    Tensor tape_l = t.value(cls.apply(t, t.constant(z)));
    Tensor val_l = cls.logits(z);
    REQUIRE(tape_l.shape() == std::vector<std::size_t>{3, 4});
    for (std::size_t i = 0; i < tape_l.size(); ++i) CHECK(tape_l[i] == val_l[i]);
}

TEST_CASE("mse mapper: value forward matches tape, maps latent to latent") {
    Rng init(61);
    MseMapper m("map", 8, 12, 2, init);
    Rng perturb(62);
    m.out_proj.W.value = Tensor::normal(m.out_proj.W.value.shape(), perturb, 0.1);
    Rng data(63);
    Tensor z = Tensor::normal({3, 8}, data);
    Tensor mapped = m.map(z);
    CHECK(mapped.shape() == z.shape());
    Tape t;
    Tensor tape_m = t.value(m.apply(t, t.constant(z)));
    for (std::size_t i = 0; i < mapped.size(); ++i) CHECK(tape_m[i] == mapped[i]);
    // zero-initialized output layer: initial map adds nothing beyond the residual path
    MseMapper fresh("map", 8, 12, 2, init);
    Tensor id = fresh.map(z);
    for (std::size_t i = 0; i < id.size(); ++i) CHECK(id[i] == z[i]);
}

TEST_CASE("parameter counts: flow net is the largest head at default sizes") {
    Rng rng(71);
    // defaults used by the trainer: latent 256, vae hidden 48, flow 64x4, cls 64
    VaeHead vae("vae", 64, 48, 256, rng);
    FlowFieldNet flow("flow", 256, 64, 4, rng);
    ClassifierHead cls("cls", 256, 64, 10, rng);
    CHECK(flow.param_count() > vae.param_count());
    CHECK(vae.param_count() > cls.param_count());

    // exact arithmetic for the linear layer
    Linear lin("lin", 7, 3, rng);
    CHECK(lin.param_count() == 7 * 3 + 3);
}

TEST_CASE("collect gathers every parameter exactly once") {
    Rng rng(81);
    FlowFieldNet flow("flow", 8, 16, 3, rng);
    std::vector<Parameter*> ps;
    flow.collect(ps);
    std::size_t total = 0;
    for (auto* p : ps) total += p->size();
    CHECK(total == flow.param_count());
    // in_proj + 3 blocks x 2 linears + out_proj + skip = 9 layers, 2 params each
    CHECK(ps.size() == 18);
}
