#pragma once

#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

namespace splinelab {

double median(std::vector<double> v);
// Linear-interpolation quantile, q in [0,1].
double quantile(std::vector<double> v, double q);

// FNV-1a 64 as 16 hex digits; used for config hashes (nlohmann::json dumps
// object keys sorted, so the hash is stable under field reordering).
std::string fnv1a_hex(const std::string& s);

void ensure_dir(const std::string& path);
void write_file(const std::string& path, const std::string& content);

// Runs fn(0..n-1) across up to `workers` threads; rethrows the first
// exception after joining. fn must only touch its own slot.
void parallel_for(size_t n, size_t workers, const std::function<void(size_t)>& fn);

}  // namespace splinelab
