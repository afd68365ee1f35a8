#pragma once

#include <vector>

#include <Eigen/Dense>

#include "mendart/states.hpp"

namespace mendart {

/// Low-order photon and atom moments at one output time.
struct ObservableRecord {
    double t{0.0};
    double gt{0.0};
    double mean_n{0.0};
    double mean_n2{0.0};
    double var_n{0.0};
    double p_e{0.0};
    double n_sigma_z{0.0};
    double n2_sigma_z{0.0};
    double trace{0.0};
    std::vector<double> photon_dist;  // p(n) = a(n,n) + b(n,n)
};

/// Moments from the ground- and excited-atom photon populations.
inline ObservableRecord observables_from_diagonals(const RVector& ground, const RVector& excited,
                                                   double t = 0.0, double gt = 0.0)
{
    ObservableRecord r;
    r.t = t;
    r.gt = gt;
    const Eigen::Index levels = ground.size();
    const RVector n = RVector::LinSpaced(levels, 0.0, static_cast<double>(levels - 1));
    const RVector n2 = n.cwiseProduct(n);
    const RVector total = ground + excited;
    const RVector inversion = excited - ground;
    r.trace = total.sum();
    r.mean_n = n.dot(total);
    r.mean_n2 = n2.dot(total);
    r.var_n = r.mean_n2 - r.mean_n * r.mean_n;
    r.p_e = excited.sum();
    r.n_sigma_z = n.dot(inversion);
    r.n2_sigma_z = n2.dot(inversion);
    r.photon_dist.assign(total.data(), total.data() + levels);
    return r;
}

inline ObservableRecord observables(const DensityState& s, double t = 0.0, double gt = 0.0)
{
    return observables_from_diagonals(s.a.diagonal().real(), s.b.diagonal().real(), t, gt);
}

inline ObservableRecord observables(const PopulationState& s, double t = 0.0, double gt = 0.0)
{
    return observables_from_diagonals(s.a_diag, s.b_diag, t, gt);
}

} // namespace mendart
