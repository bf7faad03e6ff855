#ifndef RARECC_GRID_HPP
#define RARECC_GRID_HPP

#include <cstddef>
#include <vector>

namespace rarecc {

// Space-time discretization of the ring road [0, L] x [0, T].
// dt is tied to dx by the Courant number: dt = cfl * dx / u_max, and nt is
// the smallest integer with nt * dt >= T.
struct Grid {
  double L = 1.0;
  double T = 5.0;
  int nx = 100;
  double dx = 0.01;
  double dt = 0.005;
  int nt = 1000;
  double cfl = 0.5;
  double u_max = 1.0;

  double x_center(int j) const { return (static_cast<double>(j) + 0.5) * dx; }
  double t_node(int n) const { return static_cast<double>(n) * dt; }

  // Periodic cell index; bijective on 0..nx-1 for any integer j.
  int wrap(long long j) const {
    const long long n = nx;
    return static_cast<int>(((j % n) + n) % n);
  }

  // Quadrature weight of one space-time cell.
  double cell_weight() const { return dx * dt; }

  bool operator==(const Grid&) const = default;
};

Grid build_grid(double L, double T, int nx, double cfl, double u_max);

// Scalar function on the grid, row-major (time, then space). State fields
// carry nt+1 rows (the initial slice included); per-step fields carry nt.
class Field {
 public:
  Field() = default;
  Field(int rows, int cols, double fill = 0.0);

  static Field state(const Grid& g, double fill = 0.0);   // (nt+1) x nx
  static Field steps(const Grid& g, double fill = 0.0);   // nt x nx

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return v_.size(); }

  double& at(int n, int j) { return v_[static_cast<std::size_t>(n) * cols_ + j]; }
  double at(int n, int j) const { return v_[static_cast<std::size_t>(n) * cols_ + j]; }

  double* row(int n) { return v_.data() + static_cast<std::size_t>(n) * cols_; }
  const double* row(int n) const { return v_.data() + static_cast<std::size_t>(n) * cols_; }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }

  std::vector<double>& values() { return v_; }
  const std::vector<double>& values() const { return v_; }

  bool same_shape(const Field& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  bool all_finite() const;
  double max_value() const;

  void fill(double v);

  bool operator==(const Field&) const = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> v_;
};

// Throwing shape/finiteness guards used at module boundaries.
void require_shape(const Field& f, int rows, int cols, const char* what);
void require_finite(const Field& f, const char* what);

// Midpoint space-time quadrature: sum of entries times dx*dt.
double integrate(const Field& f, const Grid& g);

}  // namespace rarecc

#endif  // RARECC_GRID_HPP
