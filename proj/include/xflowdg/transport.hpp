#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "xflowdg/autodiff.hpp"
#include "xflowdg/models.hpp"
#include "xflowdg/tensor.hpp"

namespace xflowdg {

/// z_t = (1 - t) z_img + t z_txt. Endpoints are exact.
Tensor interpolate(const Tensor& z_img, const Tensor& z_txt, double t);

/// Ground-truth straight-path velocity: z_txt - z_img (independent of t).
Tensor target_velocity(const Tensor& z_img, const Tensor& z_txt);

/// Velocity callback for the integrator; z keeps whatever shape z0 has.
using VelocityFn = std::function<Tensor(const Tensor& z, double t)>;

struct TransportResult {
    Tensor z1;
    std::vector<Tensor> trajectory;  // N + 1 states when recorded, else empty
    std::size_t steps = 0;
};

/// Left-endpoint explicit Euler on the uniform grid t_k = k/N:
/// z_{k+1} = z_k + (1/N) field(z_k, k/N).
TransportResult euler_transport(const VelocityFn& field, const Tensor& z0, std::size_t steps,
                                bool record_trajectory = false);

/// Same integration over a batch of latent rows, differentiable through the
/// whole unroll (training path).
Var euler_transport_rows(Tape& t, FlowFieldNet& net, Var z0, std::size_t steps);

/// Value-level batch transport with the trained field (evaluation path).
Tensor transport_rows(const FlowFieldNet& net, const Tensor& z0, std::size_t steps);

}  // namespace xflowdg
