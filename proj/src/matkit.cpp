#include "projae/matkit.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>

#include "projae/error.hpp"

namespace projae {

namespace {

Mat kron(const Mat& a, const Mat& b) {
    Mat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

// Kronecker form of A p + q A = rhs, no structural checks.
Mat sylvester_kron(const Mat& p, const Mat& q, const Mat& rhs) {
    const Eigen::Index k = q.rows();
    const Eigen::Index r = p.rows();
    Mat big = kron(p.transpose(), Mat::Identity(k, k)) + kron(Mat::Identity(r, r), q);
    Vec v = Eigen::Map<const Vec>(rhs.data(), rhs.size());
    Vec sol = solve(big, v);
    return Eigen::Map<const Mat>(sol.data(), k, r);
}

bool is_spd(const Mat& m) {
    if (m.rows() != m.cols()) return false;
    const double scale = std::max(1.0, m.norm());
    if ((m - m.transpose()).norm() > 1e-12 * scale) return false;
    Eigen::LLT<Mat> llt(0.5 * (m + m.transpose()));
    return llt.info() == Eigen::Success;
}

}  // namespace

QrResult qr_thin(const Mat& m) {
    const Eigen::Index n = m.rows();
    const Eigen::Index r = m.cols();
    if (r > n) throw ShapeError("qr_thin: more columns than rows");
    Eigen::ColPivHouseholderQR<Mat> piv(m);
    piv.setThreshold(1e-13);
    if (piv.rank() < r) throw RankDeficientError("qr_thin: rank-deficient input", piv.rank());

    Eigen::HouseholderQR<Mat> qr(m);
    Mat q = qr.householderQ() * Mat::Identity(n, r);
    Mat rr = qr.matrixQR().topLeftCorner(r, r).triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < r; ++j) {
        if (rr(j, j) < 0.0) {
            q.col(j) *= -1.0;
            rr.row(j) *= -1.0;
        }
    }
    return {std::move(q), std::move(rr)};
}

SvdResult svd(const Mat& m) {
    Eigen::JacobiSVD<Mat> s(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (s.info() != Eigen::Success) throw ConvergenceError("svd did not converge");
    return {s.matrixU(), s.singularValues(), s.matrixV()};
}

LuInfo lu_info(const Mat& m) {
    if (m.rows() != m.cols()) throw ShapeError("lu_info: matrix not square");
    Eigen::PartialPivLU<Mat> lu(m);
    LuInfo info;
    info.det = lu.determinant();
    info.norm = m.norm();
    info.min_pivot = m.rows() == 0 ? 0.0 : lu.matrixLU().diagonal().cwiseAbs().minCoeff();
    return info;
}

bool in_positive_domain(const Mat& m) {
    const LuInfo info = lu_info(m);
    return info.det > 0.0 && info.min_pivot > 1e-14 * info.norm && std::abs(info.det) >= 1e-300;
}

Mat solve(const Mat& a, const Mat& b) {
    if (a.rows() != a.cols() || a.rows() != b.rows()) throw ShapeError("solve: shape mismatch");
    Eigen::PartialPivLU<Mat> lu(a);
    const double piv = a.rows() == 0 ? 0.0 : lu.matrixLU().diagonal().cwiseAbs().minCoeff();
    if (!(piv > 1e-14 * a.norm())) throw SingularMatrixError("solve: singular matrix");
    return lu.solve(b);
}

Vec solve_vec(const Mat& a, const Vec& b) {
    Mat bm = b;
    return solve(a, bm).col(0);
}

Mat solve_sylvester(const Mat& p, const Mat& q, const Mat& rhs) {
    if (rhs.rows() != q.rows() || rhs.cols() != p.rows()) throw ShapeError("solve_sylvester: shape mismatch");
    if (!is_spd(p) || !is_spd(q)) throw NotSpdError("solve_sylvester: coefficients must be SPD");
    return sylvester_kron(p, q, rhs);
}

Mat solve_lyapunov(const Mat& a, const Mat& q) {
    if (a.rows() != a.cols() || q.rows() != a.rows() || q.cols() != a.cols())
        throw ShapeError("solve_lyapunov: shape mismatch");
    Eigen::EigenSolver<Mat> es(a, false);
    if (es.eigenvalues().real().maxCoeff() >= 0.0) throw NotHurwitzError("solve_lyapunov: a is not Hurwitz");
    // a W + W a^T = -q  <=>  W a^T + a W = -q
    Mat w = sylvester_kron(a.transpose(), a, -q);
    return 0.5 * (w + w.transpose());
}

Mat random_orthonormal(long n, long r, std::uint64_t seed) {
    if (r > n || r < 0) throw ShapeError("random_orthonormal: need 0 <= r <= n");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Mat g(n, n);
    for (long j = 0; j < n; ++j)
        for (long i = 0; i < n; ++i) g(i, j) = normal(rng);
    Eigen::HouseholderQR<Mat> qr(g);
    Mat q = qr.householderQ();
    const Mat& packed = qr.matrixQR();
    for (long j = 0; j < n; ++j)
        if (packed(j, j) < 0.0) q.col(j) *= -1.0;
    return q.leftCols(r);
}

Vec principal_angles(const Mat& a, const Mat& b) {
    Mat qa = qr_thin(a).Q;
    Mat qb = qr_thin(b).Q;
    Vec s = svd(qa.transpose() * qb).S;
    Vec ang(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) ang(i) = std::acos(std::min(1.0, s(i)));
    return ang.reverse();
}

Mat null_space(const Mat& l, double rel_tol) {
    const Eigen::Index n = l.cols();
    Eigen::JacobiSVD<Mat> s(l, Eigen::ComputeFullV);
    const Vec& sv = s.singularValues();
    const double tol = rel_tol * std::max(1.0, sv.size() ? sv(0) : 0.0);
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > tol) ++rank;
    return s.matrixV().rightCols(n - rank);
}

}  // namespace projae
