#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace tpcflow {

/// Flat real64 parameter storage addressed by named segments. Gradients and
/// optimizer moments reuse the same layout, so "same layout" checks reduce to
/// comparing segment tables.
class ParamVector {
  public:
    struct Segment {
        std::string name;
        std::size_t offset = 0;
        std::size_t length = 0;
    };

    ParamVector() = default;

    /// Appends a zero-initialized segment and returns its offset.
    /// Throws ConfigError on duplicate name or zero length.
    std::size_t add_segment(const std::string& name, std::size_t length);

    bool has_segment(const std::string& name) const;
    const Segment& segment(const std::string& name) const;
    const std::vector<Segment>& segments() const { return segments_; }

    double* data(const std::string& name);
    const double* data(const std::string& name) const;

    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }
    std::size_t size() const { return values_.size(); }
    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    /// Same segment names, offsets and lengths.
    bool same_layout(const ParamVector& other) const;

    /// Zero-valued copy of this layout.
    ParamVector zeros_like() const;

    /// Throws NumericalError naming the first segment holding a non-finite value.
    void check_finite(const std::string& context) const;

    /// Segment name owning flat index i, or "" when out of range.
    std::string segment_of(std::size_t i) const;

    // In-place arithmetic over identical layouts.
    ParamVector& operator+=(const ParamVector& other);
    ParamVector& operator*=(double s);
    void axpy(double a, const ParamVector& x);  // this += a*x

    double dot(const ParamVector& other) const;
    double norm2() const;  // Euclidean norm over the full vector

  private:
    std::vector<Segment> segments_;
    std::vector<double> values_;
};

}  // namespace tpcflow
