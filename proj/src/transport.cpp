#include "xflowdg/transport.hpp"

#include <string>

#include "xflowdg/errors.hpp"

namespace xflowdg {

Tensor interpolate(const Tensor& z_img, const Tensor& z_txt, double t) {
    if (!(t >= 0.0 && t <= 1.0))
        throw ArgumentError("interpolation time " + std::to_string(t) + " outside [0, 1]");
    if (!z_img.same_shape(z_txt))
        throw DimensionError("interpolate shape mismatch " + z_img.shape_str() + " vs " +
                             z_txt.shape_str());
    Tensor out = z_img;
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = (1.0 - t) * z_img[i] + t * z_txt[i];
    return out;
}

Tensor target_velocity(const Tensor& z_img, const Tensor& z_txt) {
    return sub(z_txt, z_img);
}

TransportResult euler_transport(const VelocityFn& field, const Tensor& z0, std::size_t steps,
                                bool record_trajectory) {
    if (steps < 1) throw ArgumentError("euler_transport needs steps >= 1");
    TransportResult res;
    res.steps = steps;
    const double h = 1.0 / static_cast<double>(steps);
    Tensor z = z0;
    if (record_trajectory) res.trajectory.push_back(z);
    for (std::size_t k = 0; k < steps; ++k) {
        const double tk = static_cast<double>(k) / static_cast<double>(steps);
        Tensor v = field(z, tk);
        if (!v.same_shape(z))
            throw DimensionError("field returned " + v.shape_str() + " for state " +
                                 z.shape_str() + " at step " + std::to_string(k));
        v *= h;
        z += v;
        if (!z.all_finite())
            throw NumericError("non-finite transport state at step " + std::to_string(k + 1) +
                               " of " + std::to_string(steps));
        if (record_trajectory) res.trajectory.push_back(z);
    }
    res.z1 = std::move(z);
    return res;
}

Var euler_transport_rows(Tape& t, FlowFieldNet& net, Var z0, std::size_t steps) {
    if (steps < 1) throw ArgumentError("euler_transport needs steps >= 1");
    const double h = 1.0 / static_cast<double>(steps);
    Var z = z0;
    for (std::size_t k = 0; k < steps; ++k) {
        const double tk = static_cast<double>(k) / static_cast<double>(steps);
        z = t.add(z, t.scale(net.apply(t, z, tk), h));
    }
    return z;
}

Tensor transport_rows(const FlowFieldNet& net, const Tensor& z0, std::size_t steps) {
    return euler_transport(
               [&net](const Tensor& z, double tk) { return net.velocity(z, tk); }, z0, steps)
        .z1;
}

}  // namespace xflowdg
