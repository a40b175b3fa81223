#include "xflowdg/losses.hpp"

#include <cmath>
#include <string>

#include "xflowdg/errors.hpp"

namespace xflowdg {

void LossWeights::check_valid() const {
    for (double v : {img, txt, fc, fm, ce})
        if (!(v >= 0.0)) throw ArgumentError("loss weights must be >= 0");
}

namespace {

// Rows scaled to unit norm, built from the primitive op set:
// 1/n = exp(-log(n)), broadcast across columns by [N x 1] @ [1 x D].
Var normalize_rows(Tape& t, Var z) {
    const Tensor& v = t.value(z);
    if (v.rank() != 2) throw DimensionError("expected [N x D] rows, got " + v.shape_str());
    for (std::size_t i = 0; i < v.rows(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < v.cols(); ++j) acc += v.at(i, j) * v.at(i, j);
        if (acc == 0.0)
            throw ArgumentError("zero-norm row " + std::to_string(i) + ": cosine undefined");
    }
    Var inv = t.exp(t.scale(t.log(t.row_l2_norm(z)), -1.0));    // [N x 1]
    Var ones = t.constant(Tensor::full({1, v.cols()}, 1.0));    // [1 x D]
    return t.mul(z, t.matmul(inv, ones));
}

// Diagonal of a square matrix as an [N x 1] column: mask then row-sum.
Var diag_column(Tape& t, Var m) {
    const std::size_t n = t.value(m).rows();
    Var masked = t.mul(m, t.constant(Tensor::eye(n)));
    return t.matmul(masked, t.constant(Tensor::full({n, 1}, 1.0)));
}

}  // namespace

Var info_nce(Tape& t, Var zk, Var zl, double tau) {
    if (!(tau > 0.0)) throw ArgumentError("temperature must be > 0");
    const Tensor& vk = t.value(zk);
    const Tensor& vl = t.value(zl);
    if (vk.rank() != 2 || vl.rank() != 2 || vk.rows() != vl.rows() || vk.cols() != vl.cols())
        throw DimensionError("info_nce needs matching [N x D] matrices, got " + vk.shape_str() +
                             " vs " + vl.shape_str());
    if (vk.rows() == 0) throw ArgumentError("info_nce needs N >= 1");

    Var sk = normalize_rows(t, zk);
    Var sl = normalize_rows(t, zl);
    Var logits = t.scale(t.matmul(sk, sl, false, true), 1.0 / tau);  // [N x N]
    Var lse = t.log_sum_exp(logits);                                 // [N x 1]
    return t.mean(t.sub(lse, diag_column(t, logits)));
}

FclParts fcl(Tape& t, Var z_img, Var z_txt, double tau, bool inter_only) {
    FclParts p{};
    p.i2t = info_nce(t, z_img, z_txt, tau);
    p.t2i = info_nce(t, z_txt, z_img, tau);
    if (inter_only) {
        p.t2t = t.constant(Tensor::scalar(0.0));
        p.i2i = t.constant(Tensor::scalar(0.0));
        p.total = t.add(p.i2t, p.t2i);
    } else {
        p.t2t = info_nce(t, z_txt, z_txt, tau);
        p.i2i = info_nce(t, z_img, z_img, tau);
        p.total = t.add(t.add(p.i2t, p.t2i), t.scale(t.add(p.t2t, p.i2i), 0.5));
    }
    return p;
}

Var vae_loss(Tape& t, Var x, Var x_hat, Var mu, Var logvar) {
    const Tensor& xv = t.value(x);
    if (!xv.same_shape(t.value(x_hat)))
        throw DimensionError("vae_loss recon shape mismatch " + xv.shape_str() + " vs " +
                             t.value(x_hat).shape_str());
    if (!t.value(mu).same_shape(t.value(logvar)))
        throw DimensionError("vae_loss mu/logvar shape mismatch");

    Var diff = t.sub(x_hat, x);
    Var recon = t.mean(t.mul(diff, diff));

    // KL(N(mu, e^lv) || N(0, 1)) = 1/2 sum_d (mu^2 + e^lv - 1 - lv), batch mean.
    const Tensor& mv = t.value(mu);
    Var ones = t.constant(Tensor::full(mv.shape(), 1.0));
    Var kl_elem = t.scale(
        t.sub(t.add(t.mul(mu, mu), t.exp(logvar)), t.add(ones, logvar)), 0.5);
    const double n = static_cast<double>(mv.rows());
    return t.add(recon, t.scale(t.sum(kl_elem), 1.0 / n));
}

Var flow_matching_loss_at(Tape& t, const RowVelocityFn& field, Var z_img, Var z_txt,
                          const std::vector<double>& ts) {
    const Tensor& vi = t.value(z_img);
    const Tensor& vt = t.value(z_txt);
    if (vi.rank() != 2 || !vi.same_shape(vt))
        throw DimensionError("flow_matching_loss needs paired [N x D] rows, got " +
                             vi.shape_str() + " vs " + vt.shape_str());
    if (vi.rows() == 0) throw ArgumentError("flow_matching_loss needs N >= 1");
    if (ts.size() != vi.rows())
        throw ArgumentError("flow_matching_loss needs one t per pair");
    for (double tv : ts)
        if (!(tv >= 0.0 && tv <= 1.0))
            throw ArgumentError("interpolation time " + std::to_string(tv) + " outside [0, 1]");

    // z_t = (1 - t_i) z_img_i + t_i z_txt_i, per-row times as constant masks.
    Tensor tm = Tensor::zeros(vi.shape());
    Tensor om = Tensor::zeros(vi.shape());
    for (std::size_t i = 0; i < vi.rows(); ++i)
        for (std::size_t j = 0; j < vi.cols(); ++j) {
            tm.at(i, j) = ts[i];
            om.at(i, j) = 1.0 - ts[i];
        }
    Var zt = t.add(t.mul(t.constant(std::move(om)), z_img),
                   t.mul(t.constant(std::move(tm)), z_txt));
    Var target = t.sub(z_txt, z_img);
    Var resid = t.sub(field(t, zt, ts), target);
    const double n = static_cast<double>(vi.rows());
    return t.scale(t.sum(t.mul(resid, resid)), 1.0 / n);
}

Var flow_matching_loss(Tape& t, FlowFieldNet& net, Var z_img, Var z_txt, Rng& rng) {
    const std::size_t n = t.value(z_img).rows();
    std::vector<double> ts(n);
    for (auto& tv : ts) tv = rng.uniform();
    RowVelocityFn field = [&net](Tape& tp, Var z, const std::vector<double>& tv) {
        return net.apply(tp, z, tv);
    };
    return flow_matching_loss_at(t, field, z_img, z_txt, ts);
}

Var mse_mapping_loss(Tape& t, MseMapper& mapper, Var z_img, Var z_txt) {
    const Tensor& vi = t.value(z_img);
    if (vi.rank() != 2 || !vi.same_shape(t.value(z_txt)))
        throw DimensionError("mse_mapping_loss needs paired [N x D] rows");
    if (vi.rows() == 0) throw ArgumentError("mse_mapping_loss needs N >= 1");
    Var resid = t.sub(mapper.apply(t, z_img), z_txt);
    return t.scale(t.sum(t.mul(resid, resid)), 1.0 / static_cast<double>(vi.rows()));
}

Var cross_entropy(Tape& t, Var logits, const std::vector<std::uint32_t>& labels) {
    const Tensor& lv = t.value(logits);
    if (lv.rank() != 2) throw DimensionError("cross_entropy expects [N x C] logits");
    if (labels.size() != lv.rows())
        throw ArgumentError("cross_entropy label count " + std::to_string(labels.size()) +
                            " != batch rows " + std::to_string(lv.rows()));
    Tensor onehot = Tensor::zeros(lv.shape());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= lv.cols())
            throw ArgumentError("label " + std::to_string(labels[i]) + " out of range [0, " +
                                std::to_string(lv.cols()) + ")");
        onehot.at(i, labels[i]) = 1.0;
    }
    Var picked = t.matmul(t.mul(logits, t.constant(std::move(onehot))),
                          t.constant(Tensor::full({lv.cols(), 1}, 1.0)));  // [N x 1]
    return t.mean(t.sub(t.log_sum_exp(logits), picked));
}

double total_loss(const LossParts& p, const LossWeights& w) {
    w.check_valid();
    return w.img * p.vae_img + w.txt * p.vae_txt + w.fc * p.fc + w.fm * p.fm + w.ce * p.ce;
}

Var total_loss(Tape& t, Var vae_img, Var vae_txt, Var fc, Var fm, Var ce,
               const LossWeights& w) {
    w.check_valid();
    Var acc = t.scale(vae_img, w.img);
    acc = t.add(acc, t.scale(vae_txt, w.txt));
    acc = t.add(acc, t.scale(fc, w.fc));
    acc = t.add(acc, t.scale(fm, w.fm));
    acc = t.add(acc, t.scale(ce, w.ce));
    return acc;
}

}  // namespace xflowdg
