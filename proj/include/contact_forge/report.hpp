#pragma once

// Verification report, its reduction, and a deterministic sampling sweep.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

#include "json.hpp"

#include "contact_forge/errors.hpp"

namespace cforge {

using json = nlohmann::ordered_json;

enum class Status { Pass, Fail, Error };

inline std::string to_string(Status s) {
  switch (s) {
    case Status::Pass: return "PASS";
    case Status::Fail: return "FAIL";
    default: return "ERROR";
  }
}

inline constexpr std::uint64_t kDefaultSeed = 12345;

struct Report {
  std::string check;
  Status status = Status::Pass;
  json parameters = json::object();
  std::int64_t samples = 0;
  double max_residual = 0.0;
  std::optional<std::vector<double>> witness;
  std::string message;
  json metrics = json::object();
  double wall_time = 0.0;
  std::uint64_t seed = kDefaultSeed;

  bool passed() const { return status == Status::Pass; }
};

inline json to_json(const Report& r) {
  json j;
  j["check"] = r.check;
  j["status"] = to_string(r.status);
  j["parameters"] = r.parameters;
  j["samples"] = r.samples;
  j["max_residual"] = r.max_residual;
  j["witness"] = r.witness ? json(*r.witness) : json(nullptr);
  j["message"] = r.message;
  j["metrics"] = r.metrics;
  j["wall_time"] = r.wall_time;
  j["seed"] = r.seed;
  return j;
}

namespace detail {

inline int severity(Status s) { return s == Status::Pass ? 0 : s == Status::Fail ? 1 : 2; }

// Total order used to pick the representative of a merge: worse status, then
// larger residual, then the lexicographically smaller witness and message.
inline bool dominates(const Report& a, const Report& b) {
  if (severity(a.status) != severity(b.status)) return severity(a.status) > severity(b.status);
  if (a.max_residual != b.max_residual) return a.max_residual > b.max_residual;
  if (a.witness != b.witness) {
    if (!a.witness) return false;
    if (!b.witness) return true;
    return *a.witness < *b.witness;
  }
  return a.message < b.message;
}

}  // namespace detail

// Associative and commutative combination of two partial reports of the same
// check (status, residual and witness from the dominating side; sample counts
// and times add; numeric metrics combine by max).
inline Report merge(const Report& a, const Report& b) {
  const Report& top = detail::dominates(b, a) ? b : a;
  const Report& other = &top == &a ? b : a;
  Report out = top;
  out.samples = a.samples + b.samples;
  out.wall_time = a.wall_time + b.wall_time;
  for (auto it = other.metrics.begin(); it != other.metrics.end(); ++it) {
    if (!out.metrics.contains(it.key())) {
      out.metrics[it.key()] = it.value();
    } else if (it.value().is_number() && out.metrics[it.key()].is_number()) {
      out.metrics[it.key()] = std::max(out.metrics[it.key()].get<double>(), it.value().get<double>());
    }
  }
  return out;
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed = kDefaultSeed) : seed_(seed), gen_(seed) {}
  std::uint64_t seed() const { return seed_; }
  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(gen_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(gen_); }
  std::mt19937_64& engine() { return gen_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

// Outcome of checking one sample.
struct SampleResult {
  double residual = 0.0;
  bool ok = true;
  std::string note;
};

// Runs `fn` (called with a point, or with a point and its index) over the
// points, optionally on several threads, and folds the results in index
// order so the report does not depend on scheduling.
// The witness is the failing point of largest residual (first on ties), or
// the largest-residual point overall when everything passes.
template <class Point, class F>
Report sweep(std::string check, const std::vector<Point>& points, F fn, int threads = 1) {
  Stopwatch clock;
  std::vector<SampleResult> results(points.size());
  std::vector<std::string> errors(points.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      try {
        if constexpr (std::is_invocable_v<F&, const Point&, std::size_t>) results[i] = fn(points[i], i);
        else results[i] = fn(points[i]);
      } catch (const std::exception& e) {
        errors[i] = e.what();
        if (errors[i].empty()) errors[i] = "error";
      }
    }
  };
  const std::size_t n = points.size();
  const std::size_t t = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), 1, std::max<std::size_t>(n, 1));
  if (t == 1) {
    work(0, n);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < t; ++k) pool.emplace_back(work, n * k / t, n * (k + 1) / t);
    for (auto& th : pool) th.join();
  }

  Report rep;
  rep.check = std::move(check);
  rep.samples = static_cast<std::int64_t>(n);
  std::optional<std::size_t> first_fail, first_error, worst;
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i].empty()) {
      if (!first_error) first_error = i;
      continue;
    }
    rep.max_residual = std::max(rep.max_residual, results[i].residual);
    if (!worst || results[i].residual > results[*worst].residual) worst = i;
    if (!results[i].ok && (!first_fail || results[i].residual > results[*first_fail].residual)) first_fail = i;
  }
  auto as_vec = [](const Point& p) { return std::vector<double>(p.begin(), p.end()); };
  if (first_error) {
    rep.status = Status::Error;
    rep.witness = as_vec(points[*first_error]);
    rep.message = errors[*first_error];
  } else if (first_fail) {
    rep.status = Status::Fail;
    rep.witness = as_vec(points[*first_fail]);
    rep.message = results[*first_fail].note.empty() ? "tolerance exceeded" : results[*first_fail].note;
  } else if (worst) {
    rep.witness = as_vec(points[*worst]);
  }
  rep.wall_time = clock.seconds();
  return rep;
}

// Report for a check that raised before producing samples.
inline Report error_report(std::string check, const std::string& message, json parameters = json::object()) {
  Report r;
  r.check = std::move(check);
  r.status = Status::Error;
  r.message = message;
  r.parameters = std::move(parameters);
  return r;
}

}  // namespace cforge
