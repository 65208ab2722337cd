#pragma once

#include <stdexcept>
#include <string>

namespace cylflow {

/// Bad user input: malformed config, out-of-range parameter, unreadable file.
/// The CLI maps this to exit code 2.
class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

/// An iteration left its admissible region (contraction failed, a(tau) drifted
/// out of range, a path blew up). Carries the time at which it happened when
/// known. The CLI maps this to exit code 3.
class divergence_error : public std::runtime_error {
public:
    explicit divergence_error(const std::string& what, double tau = -1.0)
        : std::runtime_error(what), tau_(tau) {}
    double tau() const { return tau_; }

private:
    double tau_;
};

/// Internal invariant violated (a precondition the caller must guarantee).
class invariant_error : public std::logic_error {
public:
    explicit invariant_error(const std::string& what) : std::logic_error(what) {}
};

#define CYLFLOW_REQUIRE(cond, msg) \
    do { if (!(cond)) throw ::cylflow::invariant_error(msg); } while (0)

} // namespace cylflow
