#pragma once

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace ekflab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Deterministic input signal u(t). Supports the zero signal, a constant,
/// a piecewise-constant table (zero-order hold, last value held past the
/// table), and an arbitrary callable.
class InputSignal {
  public:
    static InputSignal zero(int dim) {
        InputSignal s;
        s.dim_ = check_dim(dim);
        s.value_ = Vector::Zero(dim);
        return s;
    }

    static InputSignal constant(Vector value) {
        InputSignal s;
        s.dim_ = static_cast<int>(value.size());
        s.value_ = std::move(value);
        return s;
    }

    static InputSignal table(std::vector<double> times, std::vector<Vector> values) {
        if (times.empty() || times.size() != values.size())
            throw std::invalid_argument("InputSignal::table: times/values must be nonempty and equal length");
        for (std::size_t k = 1; k < times.size(); ++k)
            if (times[k] <= times[k - 1])
                throw std::invalid_argument("InputSignal::table: times must be strictly increasing");
        InputSignal s;
        s.dim_ = static_cast<int>(values.front().size());
        s.times_ = std::move(times);
        s.values_ = std::move(values);
        return s;
    }

    static InputSignal callable(int dim, std::function<Vector(double)> fn) {
        InputSignal s;
        s.dim_ = check_dim(dim);
        s.fn_ = std::move(fn);
        return s;
    }

    Vector operator()(double t) const {
        if (fn_) return fn_(t);
        if (!times_.empty()) {
            // zero-order hold: value of the last breakpoint <= t
            std::size_t k = 0;
            while (k + 1 < times_.size() && times_[k + 1] <= t) ++k;
            return values_[k];
        }
        return value_;
    }

    int dim() const { return dim_; }

  private:
    static int check_dim(int dim) {
        if (dim < 0) throw std::invalid_argument("InputSignal: dim must be nonnegative");
        return dim;
    }

    int dim_ = 0;
    Vector value_ = Vector::Zero(0);
    std::vector<double> times_;
    std::vector<Vector> values_;
    std::function<Vector(double)> fn_;
};

}  // namespace ekflab
