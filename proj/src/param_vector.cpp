#include "tpcflow/param_vector.hpp"

#include <cmath>

#include "tpcflow/errors.hpp"

namespace tpcflow {

std::size_t ParamVector::add_segment(const std::string& name, std::size_t length) {
    if (length == 0) throw ConfigError("segment '" + name + "' has zero length");
    if (has_segment(name)) throw ConfigError("duplicate segment name '" + name + "'");
    const std::size_t offset = values_.size();
    segments_.push_back({name, offset, length});
    values_.resize(offset + length, 0.0);
    return offset;
}

bool ParamVector::has_segment(const std::string& name) const {
    for (const auto& s : segments_)
        if (s.name == name) return true;
    return false;
}

const ParamVector::Segment& ParamVector::segment(const std::string& name) const {
    for (const auto& s : segments_)
        if (s.name == name) return s;
    throw ConfigError("unknown segment '" + name + "'");
}

double* ParamVector::data(const std::string& name) { return values_.data() + segment(name).offset; }

const double* ParamVector::data(const std::string& name) const {
    return values_.data() + segment(name).offset;
}

bool ParamVector::same_layout(const ParamVector& other) const {
    if (segments_.size() != other.segments_.size()) return false;
    for (std::size_t i = 0; i < segments_.size(); ++i) {
        const auto& a = segments_[i];
        const auto& b = other.segments_[i];
        if (a.name != b.name || a.offset != b.offset || a.length != b.length) return false;
    }
    return true;
}

ParamVector ParamVector::zeros_like() const {
    ParamVector out;
    out.segments_ = segments_;
    out.values_.assign(values_.size(), 0.0);
    return out;
}

void ParamVector::check_finite(const std::string& context) const {
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i])) {
            throw NumericalError("non-finite value in " + context, segment_of(i));
        }
    }
}

std::string ParamVector::segment_of(std::size_t i) const {
    for (const auto& s : segments_)
        if (i >= s.offset && i < s.offset + s.length) return s.name;
    return "";
}

ParamVector& ParamVector::operator+=(const ParamVector& other) {
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
    return *this;
}

ParamVector& ParamVector::operator*=(double s) {
    for (auto& v : values_) v *= s;
    return *this;
}

void ParamVector::axpy(double a, const ParamVector& x) {
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += a * x.values_[i];
}

double ParamVector::dot(const ParamVector& other) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < values_.size(); ++i) acc += values_[i] * other.values_[i];
    return acc;
}

double ParamVector::norm2() const { return std::sqrt(dot(*this)); }

}  // namespace tpcflow
