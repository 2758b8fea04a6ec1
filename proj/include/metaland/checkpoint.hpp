// Text checkpoint of an Agent. Every double is written as a hexfloat, so a
// save/load round trip is bit-exact.
#pragma once

#include <cstdlib>
#include <fstream>
#include <ios>
#include <sstream>
#include <string>

#include "metaland/rollout.hpp"

namespace metaland {

inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline void write_values(std::ostream& out, const double* data, Eigen::Index n) {
  for (Eigen::Index i = 0; i < n; ++i) {
    out << (i % 6 == 0 ? "" : " ") << std::hexfloat << data[i];
    if (i % 6 == 5 || i + 1 == n) out << '\n';
  }
  out << std::defaultfloat;
}

inline double read_double(std::istream& in) {
  std::string token;
  if (!(in >> token)) throw Error(ErrorCode::ParseError, "checkpoint truncated");
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0') {
    throw Error(ErrorCode::ParseError, "checkpoint: bad number '" + token + "'");
  }
  return v;
}

inline void expect(std::istream& in, const std::string& word) {
  std::string token;
  if (!(in >> token) || token != word) {
    throw Error(ErrorCode::ParseError,
                "checkpoint: expected '" + word + "', got '" + token + "'");
  }
}

template <class T>
T read_value(std::istream& in, const char* what) {
  T v{};
  if (!(in >> v)) {
    throw Error(ErrorCode::ParseError, std::string("checkpoint: bad ") + what);
  }
  return v;
}

inline void write_net(std::ostream& out, const std::string& role,
                      const NetParams& p) {
  const LayerSpec& s = p.spec;
  out << "net " << role << ' ' << s.input_dim << ' ' << s.h1 << ' ' << s.h2
      << ' ' << s.h3 << ' ' << s.output_dim << ' ' << (s.recurrent ? 1 : 0)
      << ' ' << (p.has_log_std() ? 1 : 0) << '\n';
  for (const TensorView& t : p.tensors()) {
    out << "tensor " << t.name << ' ' << t.rows << ' ' << t.cols << '\n';
    write_values(out, t.data, t.size());
  }
}

inline NetParams read_net(std::istream& in, const std::string& role) {
  expect(in, "net");
  expect(in, role);
  LayerSpec s;
  s.input_dim = read_value<int>(in, "spec");
  s.h1 = read_value<int>(in, "spec");
  s.h2 = read_value<int>(in, "spec");
  s.h3 = read_value<int>(in, "spec");
  s.output_dim = read_value<int>(in, "spec");
  s.recurrent = read_value<int>(in, "spec") != 0;
  const bool with_log_std = read_value<int>(in, "spec") != 0;
  if (s.input_dim < 1 || s.h1 < 1 || s.h2 < 1 || s.h3 < 1 || s.output_dim < 1) {
    throw Error(ErrorCode::ShapeError, "checkpoint: invalid layer sizes");
  }
  NetParams p = NetParams::zeros(s, with_log_std);
  for (TensorView& t : p.tensors()) {
    expect(in, "tensor");
    expect(in, t.name);
    const auto rows = read_value<Eigen::Index>(in, "rows");
    const auto cols = read_value<Eigen::Index>(in, "cols");
    if (rows != t.rows || cols != t.cols) {
      throw Error(ErrorCode::ShapeError, "checkpoint: shape mismatch in " + t.name);
    }
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data[i] = read_double(in);
  }
  return p;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& out, const Agent& agent) {
  out << "metaland-checkpoint " << kCheckpointVersion << '\n';
  out << "unroll " << agent.unroll << '\n';
  const ObsScaler& sc = agent.scaler;
  out << "scaler " << sc.dim() << ' ' << std::hexfloat << sc.count()
      << std::defaultfloat << '\n';
  detail::write_values(out, sc.mean().data(), sc.mean().size());
  detail::write_values(out, sc.m2().data(), sc.m2().size());
  detail::write_net(out, "policy", agent.policy);
  detail::write_net(out, "value", agent.value);
  out << "end\n";
}

inline Agent read_checkpoint(std::istream& in) {
  detail::expect(in, "metaland-checkpoint");
  const int version = detail::read_value<int>(in, "version");
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::ParseError,
                "checkpoint: unsupported version " + std::to_string(version));
  }
  Agent a;
  detail::expect(in, "unroll");
  a.unroll = detail::read_value<int>(in, "unroll");
  if (a.unroll < 1) throw Error(ErrorCode::ParseError, "checkpoint: bad unroll");
  detail::expect(in, "scaler");
  const int dim = detail::read_value<int>(in, "scaler dim");
  if (dim < 1) throw Error(ErrorCode::ParseError, "checkpoint: bad scaler dim");
  const double count = detail::read_double(in);
  Eigen::VectorXd mean(dim), m2(dim);
  for (int i = 0; i < dim; ++i) mean[i] = detail::read_double(in);
  for (int i = 0; i < dim; ++i) m2[i] = detail::read_double(in);
  a.scaler = ObsScaler(dim);
  a.scaler.set_state(mean, m2, count);
  a.policy = detail::read_net(in, "policy");
  a.value = detail::read_net(in, "value");
  detail::expect(in, "end");
  if (a.policy.spec.input_dim != dim || a.value.spec.input_dim != dim) {
    throw Error(ErrorCode::ShapeError, "checkpoint: scaler/network dim mismatch");
  }
  return a;
}

inline void save_checkpoint(const std::string& path, const Agent& agent) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  write_checkpoint(out, agent);
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path);
}

inline Agent load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
  return read_checkpoint(in);
}

}  // namespace metaland
