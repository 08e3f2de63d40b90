#pragma once

#include <cstdint>

#include "projae/matkit.hpp"

namespace projae {

// Free representatives (phi~, psi~) of a layer's weights. Valid members of D+
// satisfy det(psi~^T phi~) > 0.
struct PairRep {
    Mat phi_t;
    Mat psi_t;
};

// psi^T phi = I.
struct BiorthogonalPair {
    Mat phi;
    Mat psi;
};

// Throws DomainError outside D+.
void check_domain(const PairRep& rep);

BiorthogonalPair project_pair(const PairRep& rep);

struct RegularizerValue {
    double value = 0.0;
    Mat grad_phi_t;
    Mat grad_psi_t;
};

// ||M - I||_F^2 ||M^-1||_F^2 with M = psi~^T phi~.
RegularizerValue pair_regularizer(const PairRep& rep);

struct TangentPair {
    Mat dphi;
    Mat dpsi;
};

// Orthogonal projection of (dphi, dpsi) onto the tangent space of the
// biorthogonal manifold at pair.
TangentPair tangent_project(const BiorthogonalPair& pair, const Mat& dphi, const Mat& dpsi);

double frob_orthogonality_penalty(const BiorthogonalPair& pair);

struct SparsityValue {
    double value = 0.0;
    Mat grad;  // subgradient with respect to psi; zero rows get zero
};

// ||qf(psi)||_{1,2} - r.
SparsityValue grassmann_row_sparsity(const Mat& psi);

PairRep init_pair(long n, long r, std::uint64_t seed);

}  // namespace projae
