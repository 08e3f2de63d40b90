#include "projae/biortho.hpp"

#include <cmath>

#include "projae/error.hpp"

namespace projae {

void check_domain(const PairRep& rep) {
    if (rep.phi_t.rows() != rep.psi_t.rows() || rep.phi_t.cols() != rep.psi_t.cols())
        throw ShapeError("pair representatives must share a shape");
    const Mat m = rep.psi_t.transpose() * rep.phi_t;
    const LuInfo info = lu_info(m);
    if (!(info.det > 0.0) || std::abs(info.det) < 1e-300 || !(info.min_pivot > 1e-14 * info.norm))
        throw DomainError("pair representative outside D+ (det(psi^T phi) = " + std::to_string(info.det) + ")");
}

BiorthogonalPair project_pair(const PairRep& rep) {
    check_domain(rep);
    const Mat m = rep.psi_t.transpose() * rep.phi_t;
    // phi~ M^-1 = (M^-T phi~^T)^T
    Mat phi = solve(m.transpose(), rep.phi_t.transpose()).transpose();
    return {std::move(phi), rep.psi_t};
}

RegularizerValue pair_regularizer(const PairRep& rep) {
    const Eigen::Index r = rep.phi_t.cols();
    const Mat m = rep.psi_t.transpose() * rep.phi_t;
    const Mat inv = solve(m, Mat::Identity(r, r));
    const Mat e = m - Mat::Identity(r, r);
    const double ee = e.squaredNorm();
    const double nn = inv.squaredNorm();
    const Mat g = 2.0 * nn * e - 2.0 * ee * inv.transpose() * inv * inv.transpose();
    RegularizerValue out;
    out.value = ee * nn;
    out.grad_phi_t = rep.psi_t * g;
    out.grad_psi_t = rep.phi_t * g.transpose();
    return out;
}

TangentPair tangent_project(const BiorthogonalPair& pair, const Mat& dphi, const Mat& dpsi) {
    const Mat& phi = pair.phi;
    const Mat& psi = pair.psi;
    if (dphi.rows() != phi.rows() || dphi.cols() != phi.cols() || dpsi.rows() != psi.rows() ||
        dpsi.cols() != psi.cols())
        throw ShapeError("tangent_project: shape mismatch");
    const Mat a = solve_sylvester(phi.transpose() * phi, psi.transpose() * psi,
                                  dpsi.transpose() * phi + psi.transpose() * dphi);
    return {dphi - psi * a, dpsi - phi * a.transpose()};
}

double frob_orthogonality_penalty(const BiorthogonalPair& pair) {
    return pair.phi.squaredNorm() + pair.psi.squaredNorm();
}

SparsityValue grassmann_row_sparsity(const Mat& psi) {
    const QrResult qr = qr_thin(psi);
    const Mat& u = qr.Q;
    const Eigen::Index n = u.rows();
    Mat gu = Mat::Zero(n, u.cols());
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double norm = u.row(i).norm();
        total += norm;
        if (norm > 0.0) gu.row(i) = u.row(i) / norm;
    }
    SparsityValue out;
    out.value = total - static_cast<double>(u.cols());
    // the value depends on span(psi) only: grad = (I - U U^T) G_U R^-T
    const Mat proj = gu - u * (u.transpose() * gu);
    out.grad = qr.R.triangularView<Eigen::Upper>().solve(proj.transpose()).transpose();
    return out;
}

PairRep init_pair(long n, long r, std::uint64_t seed) {
    Mat q = random_orthonormal(n, r, seed);
    return {q, q};
}

}  // namespace projae
