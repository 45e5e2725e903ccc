#include "mimovb/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace mimovb {
namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') {
    throw ConfigError("cannot parse number '" + s + "'");
  }
  return v;
}

long to_long(const std::string& s) {
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0') {
    throw ConfigError("cannot parse integer '" + s + "'");
  }
  return v;
}

bool to_bool(const std::string& s) {
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw ConfigError("cannot parse boolean '" + s + "'");
}

}  // namespace

std::string method_name(Method method) {
  switch (method) {
    case Method::kVbOnline:
      return "vb-online";
    case Method::kVbOnlineInterleaved:
      return "vb-online-interleaved";
    case Method::kVbBlock:
      return "vb-block";
    case Method::kLmmse:
      return "lmmse";
    case Method::kKf:
      return "kf";
    case Method::kGenie:
      return "genie";
  }
  throw ConfigError("unknown method");
}

Method method_from_name(const std::string& name) {
  if (name == "vb-online") return Method::kVbOnline;
  if (name == "vb-online-interleaved") return Method::kVbOnlineInterleaved;
  if (name == "vb-block") return Method::kVbBlock;
  if (name == "lmmse") return Method::kLmmse;
  if (name == "kf") return Method::kKf;
  if (name == "genie") return Method::kGenie;
  throw ConfigError("unknown method '" + name + "'");
}

double EtaSpec::nominal() const {
  switch (kind) {
    case Kind::kFixed:
      return value;
    case Kind::kDoppler:
      return eta_from_doppler(doppler_hz, sample_time_s);
    case Kind::kSlowlyVarying:
      return mean;
  }
  throw ConfigError("unknown eta specification");
}

void SimConfig::validate() const {
  if (antennas < 1) throw ConfigError("antennas must be positive");
  if (users < 1) throw ConfigError("users must be positive");
  if (pilot_len < users) {
    throw ConfigError("pilot length must be at least the user count");
  }
  if (data_len < 0) throw ConfigError("data length must be nonnegative");
  if (snr_grid_db.empty()) throw ConfigError("empty SNR grid");
  if (methods.empty()) throw ConfigError("no methods selected");
  if (iterations < 0) throw ConfigError("iterations must be nonnegative");
  if (trials < 1) throw ConfigError("trials must be positive");
  if (sections < 1) throw ConfigError("sections must be positive");
  if (!(priors.eta_var > 0.0) || !(priors.gamma_shape > 0.0) ||
      !(priors.gamma_rate > 0.0) || !(priors.nu_shape > 0.0) ||
      !(priors.nu_rate > 0.0)) {
    throw ConfigError("priors must be strictly positive");
  }
  if (correlation == CorrelationKind::kExponential &&
      std::abs(alpha) >= 1.0) {
    throw BadAlpha("correlation coefficient must satisfy |alpha| < 1");
  }
  for (Method m : methods) {
    if (m == Method::kVbOnlineInterleaved) {
      const auto plan = split_sections(pilot_len, data_len, sections);
      for (const auto& s : plan) {
        if (s.pilot_len < users) {
          throw ConfigError(
              "interleaved sections need at least K pilot slots each");
        }
      }
    }
  }
}

Constellation SimConfig::make_constellation() const {
  return Constellation::make(constellation);
}

std::vector<HermitianCov> SimConfig::spatial_covs() const {
  CorrelationSpec spec;
  spec.kind = correlation;
  spec.alpha = alpha;
  spec.antennas = antennas;
  const HermitianCov r = make_correlation(spec);
  return std::vector<HermitianCov>(users, r);
}

RVector SimConfig::nominal_eta() const {
  return RVector::Constant(users, eta.nominal());
}

FrameSpec SimConfig::frame_spec(int section_count,
                                double noise_variance) const {
  FrameSpec spec;
  spec.antennas = antennas;
  spec.users = users;
  spec.sections = split_sections(pilot_len, data_len, section_count);
  spec.constellation = make_constellation();
  spec.noise_variance = noise_variance;
  spec.gauss_markov.eta = nominal_eta();
  spec.gauss_markov.spatial = spatial_covs();
  if (eta.kind == EtaSpec::Kind::kSlowlyVarying) {
    spec.gauss_markov.mode = EtaMode::kSlowlyVarying;
    spec.gauss_markov.fluct_mean = eta.mean;
    spec.gauss_markov.fluct_var = eta.var;
    spec.gauss_markov.redraw = eta.redraw;
  }
  return spec;
}

std::vector<double> parse_snr_spec(const std::string& text) {
  const std::string t = trim(text);
  if (t.find(':') != std::string::npos) {
    const auto parts = split(t, ':');
    if (parts.size() != 3) {
      throw ConfigError("SNR range must be start:stop:step");
    }
    const double start = to_double(parts[0]);
    const double stop = to_double(parts[1]);
    const double step = to_double(parts[2]);
    if (step <= 0.0) throw ConfigError("SNR step must be positive");
    std::vector<double> out;
    for (double v = start; v <= stop + 1e-9; v += step) out.push_back(v);
    if (out.empty()) throw ConfigError("empty SNR range");
    return out;
  }
  std::vector<double> out;
  for (const auto& p : split(t, ',')) out.push_back(to_double(p));
  if (out.empty()) throw ConfigError("empty SNR list");
  return out;
}

Complex parse_complex(const std::string& text) {
  std::string t = trim(text);
  if (t.empty()) throw ConfigError("empty complex literal");
  const char* s = t.c_str();
  char* end = nullptr;
  const double first = std::strtod(s, &end);
  if (end == s) throw ConfigError("cannot parse complex '" + t + "'");
  if (*end == '\0') return Complex(first, 0.0);
  if (*end == 'j' || *end == 'i') {
    if (*(end + 1) != '\0') {
      throw ConfigError("cannot parse complex '" + t + "'");
    }
    return Complex(0.0, first);
  }
  const char* s2 = end;
  char* end2 = nullptr;
  const double second = std::strtod(s2, &end2);
  if (end2 == s2 || (*end2 != 'j' && *end2 != 'i') || *(end2 + 1) != '\0') {
    throw ConfigError("cannot parse complex '" + t + "'");
  }
  return Complex(first, second);
}

EtaSpec parse_eta_spec(const std::string& text) {
  const std::string t = trim(text);
  const auto colon = t.find(':');
  const std::string kind = colon == std::string::npos ? t : t.substr(0, colon);
  const std::string args =
      colon == std::string::npos ? std::string() : t.substr(colon + 1);
  EtaSpec spec;
  if (kind == "fixed") {
    spec.kind = EtaSpec::Kind::kFixed;
    spec.value = to_double(args);
    if (spec.value < 0.0 || spec.value > 1.0) {
      throw ConfigError("fixed eta must lie in [0, 1]");
    }
    return spec;
  }
  if (kind == "doppler") {
    const auto parts = split(args, ',');
    if (parts.size() != 2) {
      throw ConfigError("doppler eta needs 'doppler:fd_hz,ts_s'");
    }
    spec.kind = EtaSpec::Kind::kDoppler;
    spec.doppler_hz = to_double(parts[0]);
    spec.sample_time_s = to_double(parts[1]);
    return spec;
  }
  if (kind == "random") {
    const auto parts = split(args, ',');
    if (parts.size() != 2 && parts.size() != 3) {
      throw ConfigError("random eta needs 'random:mean,var[,per-frame]'");
    }
    spec.kind = EtaSpec::Kind::kSlowlyVarying;
    spec.mean = to_double(parts[0]);
    spec.var = to_double(parts[1]);
    if (parts.size() == 3) {
      if (parts[2] == "per-frame") {
        spec.redraw = EtaRedraw::kPerFrame;
      } else if (parts[2] == "per-slot") {
        spec.redraw = EtaRedraw::kPerSlot;
      } else {
        throw ConfigError("eta redraw must be per-slot or per-frame");
      }
    }
    return spec;
  }
  throw ConfigError("unknown eta specification '" + t + "'");
}

void apply_config_entry(SimConfig& cfg, const std::string& key,
                        const std::string& value) {
  if (key == "M" || key == "antennas") {
    cfg.antennas = static_cast<int>(to_long(value));
  } else if (key == "K" || key == "users") {
    cfg.users = static_cast<int>(to_long(value));
  } else if (key == "T_p" || key == "pilot_len") {
    cfg.pilot_len = static_cast<int>(to_long(value));
  } else if (key == "T_d" || key == "data_len") {
    cfg.data_len = static_cast<int>(to_long(value));
  } else if (key == "snr") {
    cfg.snr_grid_db = parse_snr_spec(value);
  } else if (key == "constellation") {
    cfg.constellation = mod_scheme_from_name(value);
  } else if (key == "correlation") {
    if (value == "identity") {
      cfg.correlation = CorrelationKind::kIdentityScaled;
    } else if (value == "exponential") {
      cfg.correlation = CorrelationKind::kExponential;
    } else {
      throw ConfigError("correlation must be identity or exponential");
    }
  } else if (key == "alpha") {
    cfg.alpha = parse_complex(value);
  } else if (key == "eta") {
    cfg.eta = parse_eta_spec(value);
  } else if (key == "methods" || key == "method") {
    cfg.methods.clear();
    for (const auto& name : split(value, ',')) {
      cfg.methods.push_back(method_from_name(name));
    }
  } else if (key == "I_tr" || key == "iterations") {
    cfg.iterations = static_cast<int>(to_long(value));
  } else if (key == "trials") {
    cfg.trials = static_cast<int>(to_long(value));
  } else if (key == "seed") {
    cfg.seed = static_cast<std::uint64_t>(to_long(value));
  } else if (key == "sections" || key == "L") {
    cfg.sections = static_cast<int>(to_long(value));
  } else if (key == "known_eta") {
    cfg.known_eta = to_bool(value);
  } else if (key == "threads") {
    cfg.threads = static_cast<int>(to_long(value));
  } else if (key == "walltime") {
    if (value == "real") {
      cfg.record_walltime = true;
    } else if (value == "zero") {
      cfg.record_walltime = false;
    } else {
      throw ConfigError("walltime must be real or zero");
    }
  } else if (key == "dump_frames") {
    cfg.dump_dir = value;
  } else if (key == "eta0_mean") {
    cfg.priors.eta_mean = to_double(value);
  } else if (key == "eta0_var") {
    cfg.priors.eta_var = to_double(value);
  } else if (key == "gamma_a0") {
    cfg.priors.gamma_shape = to_double(value);
  } else if (key == "gamma_b0") {
    cfg.priors.gamma_rate = to_double(value);
  } else if (key == "nu_a0") {
    cfg.priors.nu_shape = to_double(value);
  } else if (key == "nu_b0") {
    cfg.priors.nu_rate = to_double(value);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

SimConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  SimConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) +
                        " is not key = value");
    }
    apply_config_entry(cfg, trim(line.substr(0, eq)),
                       trim(line.substr(eq + 1)));
  }
  return cfg;
}

}  // namespace mimovb
