#include "xflowdg/models.hpp"

#include <cmath>

#include "xflowdg/errors.hpp"

namespace xflowdg {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kLogvarLo = -10.0;
constexpr double kLogvarHi = 10.0;

Tensor fan_in_uniform(std::size_t in, std::size_t out, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(in));
    return Tensor::uniform({in, out}, rng, -bound, bound);
}

void require_rows(const Tensor& v, const char* what) {
    if (v.rank() != 2) throw DimensionError(std::string(what) + " expects [N x D] rows, got " + v.shape_str());
}

}  // namespace

Linear::Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng,
               bool zero_init)
    : W(name + ".W", zero_init ? Tensor::zeros({in, out}) : fan_in_uniform(in, out, rng)),
      b(name + ".b", Tensor::zeros({out})) {}

Var Linear::apply(Tape& t, Var x) {
    return t.add(t.matmul(x, t.param(W)), t.param(b));
}

void Linear::collect(std::vector<Parameter*>& out) {
    out.push_back(&W);
    out.push_back(&b);
}

VaeHead::VaeHead(const std::string& name, std::size_t in_dim_, std::size_t hidden,
                 std::size_t latent_, Rng& rng)
    : enc1(name + ".enc1", in_dim_, hidden, rng),
      enc2(name + ".enc2", hidden, hidden, rng),
      mu_head(name + ".mu", hidden, latent_, rng),
      logvar_head(name + ".logvar", hidden, latent_, rng),
      dec1(name + ".dec1", latent_, hidden, rng),
      dec2(name + ".dec2", hidden, hidden, rng),
      dec_out(name + ".dec_out", hidden, in_dim_, rng),
      in_dim(in_dim_),
      latent(latent_) {}

VaeHead::Encoded VaeHead::encode(Tape& t, Var x, EncodeMode mode, Rng* rng) {
    require_rows(t.value(x), "vae encode");
    Var h = t.relu(enc1.apply(t, x));
    h = t.relu(enc2.apply(t, h));
    Var mu = mu_head.apply(t, h);
    Var lv_raw = logvar_head.apply(t, h);

    // clamp(x) = lo + relu(x - lo) - relu(x - hi), built from the primitive set
    const auto& lv_shape = t.value(lv_raw).shape();
    Var lo = t.constant(Tensor::full(lv_shape, kLogvarLo));
    Var hi = t.constant(Tensor::full(lv_shape, kLogvarHi));
    Var lv = t.sub(t.add(lo, t.relu(t.sub(lv_raw, lo))), t.relu(t.sub(lv_raw, hi)));

    Var z = mu;
    if (mode == EncodeMode::Sample) {
        if (rng == nullptr) throw ArgumentError("sample-mode encode needs an rng");
        Tensor eps = Tensor::normal(lv_shape, *rng);
        z = t.add(mu, t.mul(t.exp(t.scale(lv, 0.5)), t.constant(std::move(eps))));
    }
    return {z, mu, lv};
}

Var VaeHead::decode(Tape& t, Var z) {
    require_rows(t.value(z), "vae decode");
    Var h = t.relu(dec1.apply(t, z));
    h = t.relu(dec2.apply(t, h));
    return dec_out.apply(t, h);
}

void VaeHead::collect(std::vector<Parameter*>& out) {
    enc1.collect(out);
    enc2.collect(out);
    mu_head.collect(out);
    logvar_head.collect(out);
    dec1.collect(out);
    dec2.collect(out);
    dec_out.collect(out);
}

std::size_t VaeHead::param_count() const {
    return enc1.param_count() + enc2.param_count() + mu_head.param_count() +
           logvar_head.param_count() + dec1.param_count() + dec2.param_count() +
           dec_out.param_count();
}

Tensor reparameterize(const Tensor& mu, const Tensor& logvar, const Tensor& eps) {
    if (!mu.same_shape(logvar) || !mu.same_shape(eps))
        throw DimensionError("reparameterize shape mismatch: mu " + mu.shape_str() +
                             ", logvar " + logvar.shape_str() + ", eps " + eps.shape_str());
    Tensor z = mu;
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += std::exp(0.5 * logvar[i]) * eps[i];
    return z;
}

std::vector<double> time_features(double t) {
    std::vector<double> f;
    f.reserve(9);
    f.push_back(t);
    for (int k = 0; k < 8; ++k) f.push_back(std::sin(double(1 << k) * kPi * t));
    return f;
}

Tensor time_feature_rows(const std::vector<double>& ts) {
    Tensor out = Tensor::zeros({ts.size(), 9});
    for (std::size_t i = 0; i < ts.size(); ++i) {
        std::vector<double> f = time_features(ts[i]);
        for (std::size_t j = 0; j < f.size(); ++j) out.at(i, j) = f[j];
    }
    return out;
}

FlowFieldNet::FlowFieldNet(const std::string& name, std::size_t latent_, std::size_t hidden_,
                           std::size_t depth, Rng& rng)
    : in_proj(name + ".in", latent_ + 9, hidden_, rng),
      out_proj(name + ".out", hidden_, latent_, rng, /*zero_init=*/true),
      skip(name + ".skip", latent_, latent_, rng, /*zero_init=*/true),
      latent(latent_),
      hidden(hidden_) {
    blocks.reserve(depth);
    for (std::size_t i = 0; i < depth; ++i) {
        std::string bn = name + ".blk" + std::to_string(i);
        blocks.emplace_back(Linear(bn + ".a", hidden_, hidden_, rng),
                            Linear(bn + ".b", hidden_, hidden_, rng));
    }
}

Var FlowFieldNet::apply(Tape& t, Var z, const std::vector<double>& ts) {
    const Tensor& zv = t.value(z);
    require_rows(zv, "flow velocity");
    if (zv.cols() != latent)
        throw DimensionError("flow velocity latent dim mismatch: got " + zv.shape_str());
    if (ts.size() != zv.rows())
        throw ArgumentError("flow velocity needs one time per row: " + std::to_string(ts.size()) +
                            " times for " + std::to_string(zv.rows()) + " rows");
    for (double tv : ts)
        if (!(tv >= 0.0 && tv <= 1.0))
            throw ArgumentError("flow time " + std::to_string(tv) + " outside [0, 1]");

    Tensor feats = time_conditioned ? time_feature_rows(ts) : Tensor::zeros({ts.size(), 9});
    Var x = t.concat(z, t.constant(std::move(feats)), 1);
    Var h = t.tanh(in_proj.apply(t, x));
    for (auto& [a, b] : blocks) h = t.add(h, b.apply(t, t.tanh(a.apply(t, h))));
    Var raw = t.add(out_proj.apply(t, h), skip.apply(t, z));
    if (!time_conditioned) return raw;  // the hook makes the field blind to t
    Tensor gain = Tensor::zeros(t.value(raw).shape());
    for (std::size_t i = 0; i < ts.size(); ++i)
        for (std::size_t j = 0; j < latent; ++j) gain.at(i, j) = time_gain(ts[i]);
    return t.mul(raw, t.constant(std::move(gain)));
}

Var FlowFieldNet::apply(Tape& t, Var z, double time) {
    return apply(t, z, std::vector<double>(t.value(z).rows(), time));
}

Tensor FlowFieldNet::velocity(const Tensor& z, double time) const {
    require_rows(z, "flow velocity");
    if (z.cols() != latent)
        throw DimensionError("flow velocity latent dim mismatch: got " + z.shape_str());
    if (!(time >= 0.0 && time <= 1.0))
        throw ArgumentError("flow time " + std::to_string(time) + " outside [0, 1]");
    Tensor feats = time_conditioned ? time_feature_rows(std::vector<double>(z.rows(), time))
                                    : Tensor::zeros({z.rows(), 9});
    Tensor h = tanh_t(add(matmul(concat(z, feats, 1), in_proj.W.value), in_proj.b.value));
    for (const auto& [a, b] : blocks) {
        Tensor u = tanh_t(add(matmul(h, a.W.value), a.b.value));
        h += add(matmul(u, b.W.value), b.b.value);
    }
    Tensor out = add(matmul(h, out_proj.W.value), out_proj.b.value);
    out += add(matmul(z, skip.W.value), skip.b.value);
    if (time_conditioned) out *= time_gain(time);
    return out;
}

void FlowFieldNet::collect(std::vector<Parameter*>& out) {
    in_proj.collect(out);
    for (auto& [a, b] : blocks) {
        a.collect(out);
        b.collect(out);
    }
    out_proj.collect(out);
    skip.collect(out);
}

std::size_t FlowFieldNet::param_count() const {
    std::size_t n = in_proj.param_count() + out_proj.param_count() + skip.param_count();
    for (const auto& [a, b] : blocks) n += a.param_count() + b.param_count();
    return n;
}

ClassifierHead::ClassifierHead(const std::string& name, std::size_t latent_, std::size_t hidden,
                               std::size_t classes_, Rng& rng)
    : fc1(name + ".fc1", latent_, hidden, rng),
      fc2(name + ".fc2", hidden, classes_, rng),
      latent(latent_),
      classes(classes_) {}

Var ClassifierHead::apply(Tape& t, Var z) {
    require_rows(t.value(z), "classify");
    return fc2.apply(t, t.relu(fc1.apply(t, z)));
}

Tensor ClassifierHead::logits(const Tensor& z) const {
    require_rows(z, "classify");
    Tensor h = relu(add(matmul(z, fc1.W.value), fc1.b.value));
    return add(matmul(h, fc2.W.value), fc2.b.value);
}

void ClassifierHead::collect(std::vector<Parameter*>& out) {
    fc1.collect(out);
    fc2.collect(out);
}

std::size_t ClassifierHead::param_count() const {
    return fc1.param_count() + fc2.param_count();
}

std::vector<std::uint32_t> predict(const Tensor& logits) {
    require_rows(logits, "predict");
    std::vector<std::uint32_t> out(logits.rows());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < logits.cols(); ++j)
            if (logits.at(i, j) > logits.at(i, best)) best = j;  // ties keep lowest index
        out[i] = std::uint32_t(best);
    }
    return out;
}

MseMapper::MseMapper(const std::string& name, std::size_t latent_, std::size_t hidden_,
                     std::size_t depth, Rng& rng)
    : in_proj(name + ".in", latent_, hidden_, rng),
      out_proj(name + ".out", hidden_, latent_, rng, /*zero_init=*/true),
      latent(latent_),
      hidden(hidden_) {
    blocks.reserve(depth);
    for (std::size_t i = 0; i < depth; ++i) {
        std::string bn = name + ".blk" + std::to_string(i);
        blocks.emplace_back(Linear(bn + ".a", hidden_, hidden_, rng),
                            Linear(bn + ".b", hidden_, hidden_, rng));
    }
}

// Residual form z + g(z): the zero-initialized output layer makes the mapper
// start as the identity, matching the zero-field Euler transport it replaces.
Var MseMapper::apply(Tape& t, Var z) {
    require_rows(t.value(z), "mse mapper");
    Var h = t.tanh(in_proj.apply(t, z));
    for (auto& [a, b] : blocks) h = t.add(h, b.apply(t, t.tanh(a.apply(t, h))));
    return t.add(z, out_proj.apply(t, h));
}

Tensor MseMapper::map(const Tensor& z) const {
    require_rows(z, "mse mapper");
    Tensor h = tanh_t(add(matmul(z, in_proj.W.value), in_proj.b.value));
    for (const auto& [a, b] : blocks) {
        Tensor u = tanh_t(add(matmul(h, a.W.value), a.b.value));
        h += add(matmul(u, b.W.value), b.b.value);
    }
    return add(z, add(matmul(h, out_proj.W.value), out_proj.b.value));
}

void MseMapper::collect(std::vector<Parameter*>& out) {
    in_proj.collect(out);
    for (auto& [a, b] : blocks) {
        a.collect(out);
        b.collect(out);
    }
    out_proj.collect(out);
}

std::size_t MseMapper::param_count() const {
    std::size_t n = in_proj.param_count() + out_proj.param_count();
    for (const auto& [a, b] : blocks) n += a.param_count() + b.param_count();
    return n;
}

}  // namespace xflowdg
