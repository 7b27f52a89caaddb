// Shared aliases, small helpers and error types used across the library.
#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace hemivar {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;
using Mat18 = Eigen::Matrix<double, 18, 18>;
using Vec18 = Eigen::Matrix<double, 18, 1>;

/// Levi-Civita symbol eps_ijk for indices in {0,1,2}.
inline constexpr double levi_civita(int i, int j, int k) {
    if (i == j || j == k || i == k) return 0.0;
    // even permutations of (0,1,2)
    if ((i == 0 && j == 1) || (i == 1 && j == 2) || (i == 2 && j == 0)) return 1.0;
    return -1.0;
}

/// Cross-product matrix: skew(a) * x == a x x.
inline Mat3 skew(const Vec3& a) {
    Mat3 m;
    m << 0.0, -a.z(), a.y(),
         a.z(), 0.0, -a.x(),
         -a.y(), a.x(), 0.0;
    return m;
}

class ParseError : public std::runtime_error {
  public:
    ParseError(const std::string& msg, int line = 0)
        : std::runtime_error(line > 0 ? msg + " (line " + std::to_string(line) + ")" : msg),
          line_(line) {}
    int line() const { return line_; }

  private:
    int line_;
};

class ValidationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Constrained linear system found numerically singular; carries the
/// detected null-space dimension.
class SingularSystemError : public std::runtime_error {
  public:
    SingularSystemError(const std::string& msg, int null_dim)
        : std::runtime_error(msg + " (numerical null-space dimension " +
                             std::to_string(null_dim) + ")"),
          null_dim_(null_dim) {}
    int null_dim() const { return null_dim_; }

  private:
    int null_dim_;
};

class NoConvergenceError : public std::runtime_error {
  public:
    NoConvergenceError(const std::string& msg, double residual, int iterations)
        : std::runtime_error(msg + " (residual " + std::to_string(residual) + " after " +
                             std::to_string(iterations) + " iterations)"),
          residual_(residual),
          iterations_(iterations) {}
    double residual() const { return residual_; }
    int iterations() const { return iterations_; }

  private:
    double residual_;
    int iterations_;
};

/// Deterministic RNG used wherever the library needs sampling
/// (e.g. randomized KKT probes). Fixed seeds keep runs reproducible.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform(double a, double b) {
        return std::uniform_real_distribution<double>(a, b)(gen_);
    }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(gen_); }
    int uniform_int(int a, int b) {
        return std::uniform_int_distribution<int>(a, b)(gen_);
    }
    VecX normal_vector(Eigen::Index n) {
        VecX v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
        return v;
    }
    Vec3 unit_vector() {
        Vec3 v;
        do {
            v << normal(), normal(), normal();
        } while (v.norm() < 1e-8);
        return v.normalized();
    }

  private:
    std::mt19937_64 gen_;
};

}  // namespace hemivar
