#pragma once

#include <array>
#include <string>
#include <string_view>

namespace miglmm {

enum class Link { Identity, Log, Probit, Logit, CLogLog, Sqrt, Reciprocal };

inline constexpr std::array<Link, 7> kAllLinks = {Link::Identity, Link::Log,  Link::Probit,
                                                   Link::Logit,    Link::CLogLog, Link::Sqrt,
                                                   Link::Reciprocal};

/// Lowercase config-file name ("identity", "log", ..., "reciprocal").
std::string_view link_name(Link link);
/// Inverse of link_name; throws ConfigError on an unknown name.
Link parse_link(std::string_view name);

/// True for links whose inverse maps the whole real line into (0, 1).
bool is_bounded(Link link);

/// Standard normal CDF, 0.5 * erfc(-x / sqrt 2).
double normal_cdf(double x);
/// log Phi(x), stable in the lower tail.
double log_normal_cdf(double x);
double normal_pdf(double x);
/// Standard normal quantile: rational initial guess refined by Halley steps.
double normal_quantile(double p);

/// Logistic function with the branch chosen so exp() never overflows.
double logistic(double eta);

/// h(eta). Sqrt requires eta >= 0 and Reciprocal eta > 0; violations throw
/// InvalidArgument naming the link and the value.
double inverse_link(Link link, double eta);

/// g(mu). mu must lie strictly inside the range of h.
double apply_link(Link link, double mu);

}  // namespace miglmm
