#pragma once

#include <concepts>
#include <sstream>
#include <stdexcept>
#include <string>

namespace mendart {

/// Number formatting for diagnostics: integers verbatim, floats with %g-style precision.
template <class T>
std::string format_number(T value)
{
    if constexpr (std::integral<T>) {
        return std::to_string(value);
    } else {
        std::ostringstream os;
        os.precision(6);
        os << value;
        return os.str();
    }
}

/// Failure classes; the CLI maps each one to a distinct exit code.
enum class error_kind {
    domain,      // invalid model parameters
    range,       // index outside the Fock truncation
    truncation,  // occupation leaked to the top of the Fock ladder
    solver,      // integrator or propagator failure
    size,        // oracle generator too large
    config,      // malformed scenario configuration
    comparison,  // engines disagree or grids mismatch
    io,
};

class error : public std::runtime_error {
public:
    error(error_kind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind)
    {
    }

    error_kind kind() const noexcept { return kind_; }

private:
    error_kind kind_;
};

class domain_error : public error {
public:
    explicit domain_error(const std::string& what) : error(error_kind::domain, what) {}
};

class range_error : public error {
public:
    explicit range_error(const std::string& what) : error(error_kind::range, what) {}
};

class truncation_error : public error {
public:
    truncation_error(const std::string& what, double tail_mass)
        : error(error_kind::truncation, what), tail_mass_(tail_mass)
    {
    }

    double tail_mass() const noexcept { return tail_mass_; }

private:
    double tail_mass_;
};

class solver_error : public error {
public:
    explicit solver_error(const std::string& what) : error(error_kind::solver, what) {}
};

class size_error : public error {
public:
    explicit size_error(const std::string& what) : error(error_kind::size, what) {}
};

class config_error : public error {
public:
    explicit config_error(const std::string& what) : error(error_kind::config, what) {}
};

class comparison_error : public error {
public:
    explicit comparison_error(const std::string& what) : error(error_kind::comparison, what) {}
};

class io_error : public error {
public:
    explicit io_error(const std::string& what) : error(error_kind::io, what) {}
};

} // namespace mendart
