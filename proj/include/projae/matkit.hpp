#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace projae {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct QrResult {
    Mat Q;  // n x r, orthonormal columns
    Mat R;  // r x r, upper triangular with positive diagonal
};

struct SvdResult {
    Mat U;
    Vec S;  // descending
    Mat V;
};

// Thin QR with R_ii > 0. Throws RankDeficientError when rank(m) < cols(m).
QrResult qr_thin(const Mat& m);

SvdResult svd(const Mat& m);

// Square solve by partially pivoted LU. Throws SingularMatrixError when the
// smallest pivot is below 1e-14 * ||a||_F.
Mat solve(const Mat& a, const Mat& b);
Vec solve_vec(const Mat& a, const Vec& b);

// Solves A p + q A = rhs for A (p is r x r, q is k x k). Both p and q must be
// symmetric positive definite; otherwise NotSpdError.
Mat solve_sylvester(const Mat& p, const Mat& q, const Mat& rhs);

// Solves a W + W a^T + q = 0 for Hurwitz a. Throws NotHurwitzError otherwise.
Mat solve_lyapunov(const Mat& a, const Mat& q);

// First r columns of a Haar-distributed n x n orthogonal matrix.
Mat random_orthonormal(long n, long r, std::uint64_t seed);

struct LuInfo {
    double det = 0.0;
    double min_pivot = 0.0;
    double norm = 0.0;
};

LuInfo lu_info(const Mat& m);

// Sign-corrected determinant check used for the D+ domain: det > 0 and the
// smallest pivot exceeds 1e-14 * ||m||_F.
bool in_positive_domain(const Mat& m);

// Principal angles (radians, ascending) between the column spans of a and b.
Vec principal_angles(const Mat& a, const Mat& b);

// Orthonormal basis of the null space of l (rows are constraints).
Mat null_space(const Mat& l, double rel_tol = 1e-12);

}  // namespace projae
