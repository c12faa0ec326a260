#include "core/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "core/error.hpp"

namespace sitcom {

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& why) {
  fail(ErrorCode::kConfig, "config: " + path + ": " + why);
}

// Reads keys from one JSON object and rejects any it was never asked for.
class Reader {
 public:
  Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) bad(path_, "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const Json* raw(const std::string& key) {
    allowed_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <class T>
  T get(const std::string& key, T def) {
    const Json* v = raw(key);
    if (!v) return def;
    return convert<T>(*v, sub(key));
  }

  template <class T>
  T need(const std::string& key) {
    const Json* v = raw(key);
    if (!v) bad(sub(key), "required");
    return convert<T>(*v, sub(key));
  }

  std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  // Call after all reads.
  void done() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!allowed_.count(it.key())) {
        std::string valid;
        for (const auto& k : allowed_) valid += (valid.empty() ? "" : ", ") + k;
        bad(sub(it.key()), "unknown key (valid here: " + valid + ")");
      }
    }
  }

  template <class T>
  static T convert(const Json& v, const std::string& path) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) bad(path, "expected a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) bad(path, "expected a string");
      return v.get<std::string>();
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) bad(path, "expected a number");
      return v.get<double>();
    } else if constexpr (std::is_same_v<T, int>) {
      if (!v.is_number_integer()) bad(path, "expected an integer");
      return v.get<int>();
    } else if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
        bad(path, "expected a non-negative integer");
      return static_cast<T>(v.get<std::uint64_t>());
    } else {
      // std::vector<E>
      if (!v.is_array()) bad(path, "expected an array");
      T out;
      for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(convert<typename T::value_type>(v[i], path + "[" + std::to_string(i) + "]"));
      return out;
    }
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> allowed_;
};

template <class T>
void one_of(const T& v, std::initializer_list<T> ok, const std::string& path) {
  for (const auto& o : ok)
    if (v == o) return;
  std::ostringstream s;
  s << "invalid value '" << v << "' (valid:";
  for (const auto& o : ok) s << ' ' << o;
  s << ")";
  bad(path, s.str());
}

ScheduleSpec parse_schedule(Reader r) {
  ScheduleSpec s;
  s.T = r.get("T", s.T);
  s.beta_min = r.get("beta_min", s.beta_min);
  s.beta_max = r.get("beta_max", s.beta_max);
  r.done();
  return s;
}

DatasetSpec parse_dataset(Reader r) {
  DatasetSpec d;
  d.kind = r.need<std::string>("kind");
  d.seed = r.get<std::uint64_t>("seed", d.seed);
  if (d.kind == "gmm-2d") {
    d.weights = r.get("weights", d.weights);
    d.means = r.get("means", d.means);
    d.variances = r.get("variances", d.variances);
    d.gmm_file = r.get("file", d.gmm_file);
  } else if (d.kind == "blobs-8x8" || d.kind == "blobs-16x16") {
    d.min_bumps = r.get("min_bumps", d.min_bumps);
    d.max_bumps = r.get("max_bumps", d.max_bumps);
  } else if (d.kind == "gaussian-field") {
    d.side = r.get("side", d.side);
    d.field_mean = r.get("mean", d.field_mean);
    d.field_variance = r.get("variance", d.field_variance);
    d.lengthscale = r.get("lengthscale", d.lengthscale);
    d.jitter = r.get("jitter", d.jitter);
  } else if (d.kind == "gmm-blobs") {
    d.blob_side = r.get("side", d.blob_side);
    d.components = r.get("components", d.components);
    d.component_variance = r.get("variance", d.component_variance);
    d.min_bumps = r.get("min_bumps", d.min_bumps);
    d.max_bumps = r.get("max_bumps", d.max_bumps);
  } else {
    std::string valid;
    for (const auto& k : dataset_kinds()) valid += (valid.empty() ? "" : ", ") + k;
    bad(r.sub("kind"), "unknown dataset kind '" + d.kind + "' (valid: " + valid + ")");
  }
  r.done();
  return d;
}

ModelSpec parse_model(Reader r) {
  ModelSpec m;
  m.kind = r.need<std::string>("kind");
  one_of<std::string>(m.kind, {"mlp", "analytic", "zero"}, r.sub("kind"));
  if (m.kind == "mlp") {
    m.hidden = r.get("hidden", m.hidden);
    m.layers = r.get("layers", m.layers);
    m.frequencies = r.get("frequencies", m.frequencies);
    m.init_seed = r.get<std::uint64_t>("init_seed", m.init_seed);
    m.checkpoint = r.get("checkpoint", m.checkpoint);
    m.cache = r.get("cache", m.cache);
    m.data_size = r.get("data_size", m.data_size);
    m.data_seed = r.get<std::uint64_t>("data_seed", m.data_seed);
    if (const Json* t = r.raw("train")) {
      Reader tr(*t, r.sub("train"));
      m.train.iters = tr.get("iters", m.train.iters);
      m.train.batch = tr.get("batch", m.train.batch);
      m.train.lr = tr.get("lr", m.train.lr);
      m.train.final_lr_fraction = tr.get("final_lr_fraction", m.train.final_lr_fraction);
      m.train.seed = tr.get<std::uint64_t>("seed", m.train.seed);
      tr.done();
    }
  }
  r.done();
  return m;
}

OperatorSpec parse_operator(Reader r) {
  OperatorSpec o;
  o.kind = r.need<std::string>("kind");
  o.scale = r.get("scale", o.scale);
  if (o.kind == "box-mask") {
    o.box = r.need<std::vector<std::size_t>>("box");
    if (o.box.size() != 4) bad(r.sub("box"), "expected [top, left, height, width]");
  } else if (o.kind == "random-mask") {
    o.keep_prob = r.get("keep_prob", o.keep_prob);
    o.count = r.get("count", o.count);
    o.seed = r.get<std::uint64_t>("seed", o.seed);
  } else if (o.kind == "blur") {
    o.kernel = r.get("kernel", o.kernel);
    one_of<std::string>(o.kernel, {"gaussian", "motion"}, r.sub("kernel"));
    o.kernel_size = r.get("size", o.kernel_size);
    if (o.kernel == "gaussian") o.kernel_sigma = r.get("sigma", o.kernel_sigma);
    else o.seed = r.get<std::uint64_t>("seed", o.seed);
  } else if (o.kind == "downsample") {
    o.factor = r.get("factor", o.factor);
  } else if (o.kind == "fourier") {
    o.pattern = r.get("pattern", o.pattern);
    one_of<std::string>(o.pattern, {"uniform-rows", "gaussian-rows"}, r.sub("pattern"));
    o.acceleration = r.get("acceleration", o.acceleration);
    o.seed = r.get<std::uint64_t>("seed", o.seed);
  } else if (o.kind == "phase-retrieval") {
    o.oversample = r.get("oversample", o.oversample);
  } else if (o.kind == "hdr") {
    o.hdr_factor = r.get("factor", o.hdr_factor);
  } else {
    bad(r.sub("kind"), "unknown operator '" + o.kind +
                           "' (valid: box-mask, random-mask, blur, downsample, fourier, phase-retrieval, hdr)");
  }
  r.done();
  return o;
}

NoiseSpec parse_noise(Reader r) {
  NoiseSpec n;
  const std::string model = r.get<std::string>("model", "gaussian");
  one_of<std::string>(model, {"gaussian", "poisson"}, r.sub("model"));
  n.kind = model == "gaussian" ? NoiseKind::kGaussian : NoiseKind::kPoisson;
  n.sigma_y = r.get("sigma_y", n.sigma_y);
  if (n.kind == NoiseKind::kPoisson) n.lambda_y = r.get("lambda_y", n.lambda_y);
  r.done();
  return n;
}

SamplerSpec parse_sampler(Reader r) {
  SamplerSpec s;
  SamplerConfig& c = s.cfg;
  try {
    c.variant = parse_variant(r.need<std::string>("variant"));
  } catch (const Error& e) {
    bad(r.sub("variant"), e.what());
  }
  s.label = r.get("label", to_string(c.variant));
  c.N = r.get("N", c.N);
  c.K = r.get("K", c.K);
  c.lambda = r.get("lambda", c.lambda);
  c.gamma = r.get("gamma", c.gamma);
  c.optimizer = parse_optimizer(r.get<std::string>("optimizer", to_string(c.optimizer)));
  if (const Json* d = r.raw("delta")) {
    if (d->is_string()) {
      if (d->get<std::string>() != "auto") bad(r.sub("delta"), "expected a number or \"auto\"");
    } else {
      s.delta = Reader::convert<double>(*d, r.sub("delta"));
    }
  }
  if (const Json* d = r.raw("delta_multiplier")) s.delta_multiplier = Reader::convert<double>(*d, r.sub("delta_multiplier"));
  if (s.delta && s.delta_multiplier) bad(r.sub("delta"), "give either delta or delta_multiplier, not both");
  if (c.variant == Variant::kSitcomOde) c.n_ode = r.get("n_ode", c.n_ode);
  if (c.variant == Variant::kDps || c.variant == Variant::kDpsResample) {
    c.zeta = r.get("zeta", c.zeta);
    c.zeta_mode = parse_zeta_mode(r.get<std::string>("zeta_mode", to_string(c.zeta_mode)));
  }
  if (c.variant == Variant::kSitcom || c.variant == Variant::kSitcomOde)
    c.remap = parse_remap(r.get<std::string>("remap", to_string(c.remap)));
  s.best_of_k = r.get("best_of_k", s.best_of_k);
  s.selector = r.get("selector", s.selector);
  one_of<std::string>(s.selector, {"residual", "psnr"}, r.sub("selector"));
  if (s.best_of_k < 1) bad(r.sub("best_of_k"), "must be >= 1");
  try {
    c.validate();
  } catch (const Error& e) {
    bad(r.sub("variant"), e.what());
  }
  r.done();
  return s;
}

SweepSpec parse_sweep(Reader r) {
  SweepSpec s;
  s.N = r.get("N", s.N);
  s.K = r.get("K", s.K);
  s.lambda = r.get("lambda", s.lambda);
  s.delta_multipliers = r.get("delta_multipliers", s.delta_multipliers);
  s.max_cells = r.get("max_cells", s.max_cells);
  r.done();
  return s;
}

CheckSpec parse_check(Reader r) {
  CheckSpec c;
  c.kind = r.need<std::string>("kind");
  one_of<std::string>(c.kind, {"min", "max", "margin", "spread"}, r.sub("kind"));
  c.metric = r.get("metric", c.metric);
  one_of<std::string>(c.metric, {"psnr", "ssim", "mse", "residual", "runtime", "iterations"}, r.sub("metric"));
  c.value = r.need<double>("value");
  c.acceptance = r.get("acceptance", c.acceptance);
  if (c.kind == "margin") {
    c.a = r.need<std::string>("a");
    c.b = r.need<std::string>("b");
  } else if (c.kind == "spread") {
    c.labels = r.need<std::vector<std::string>>("labels");
    if (c.labels.empty()) bad(r.sub("labels"), "must not be empty");
  } else {
    c.label = r.need<std::string>("label");
  }
  c.name = r.get("name", c.kind + ":" + (c.kind == "margin" ? c.a + "-" + c.b : c.kind == "spread" ? std::string("labels") : c.label));
  r.done();
  return c;
}

}  // namespace

ExperimentConfig parse_config(const Json& j) {
  Reader r(j, "");
  ExperimentConfig c;
  c.name = r.get("name", c.name);
  c.output = r.get("output", c.name);
  c.seed = r.get<std::uint64_t>("seed", c.seed);
  c.workers = r.get("workers", c.workers);
  c.repetitions = r.get("repetitions", c.repetitions);
  c.problems = r.get("problems", c.problems);
  c.problem_seed = r.get<std::uint64_t>("problem_seed", c.problem_seed);
  c.write_images = r.get("write_images", c.write_images);
  if (c.workers < 1) bad("workers", "must be >= 1");
  if (c.repetitions < 1) bad("repetitions", "must be >= 1");
  if (c.problems < 1) bad("problems", "must be >= 1");
  if (const Json* v = r.raw("schedule")) c.schedule = parse_schedule(Reader(*v, "schedule"));
  auto section = [&r](const char* key) -> const Json& {
    const Json* v = r.raw(key);
    if (!v) bad(key, "required");
    return *v;
  };
  c.dataset = parse_dataset(Reader(section("dataset"), "dataset"));
  c.model = parse_model(Reader(section("model"), "model"));
  c.op = parse_operator(Reader(section("operator"), "operator"));
  if (const Json* v = r.raw("noise")) c.noise = parse_noise(Reader(*v, "noise"));
  if (const Json* v = r.raw("samplers")) {
    if (!v->is_array()) bad("samplers", "expected an array");
    for (std::size_t i = 0; i < v->size(); ++i)
      c.samplers.push_back(parse_sampler(Reader((*v)[i], "samplers[" + std::to_string(i) + "]")));
  }
  std::set<std::string> labels;
  for (const auto& s : c.samplers)
    if (!labels.insert(s.label).second) bad("samplers", "duplicate label '" + s.label + "'");
  if (const Json* v = r.raw("sweep")) c.sweep = parse_sweep(Reader(*v, "sweep"));
  if (const Json* v = r.raw("checks")) {
    if (!v->is_array()) bad("checks", "expected an array");
    for (std::size_t i = 0; i < v->size(); ++i)
      c.checks.push_back(parse_check(Reader((*v)[i], "checks[" + std::to_string(i) + "]")));
  }
  r.done();
  return c;
}

ExperimentConfig parse_config_text(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    fail(ErrorCode::kConfig, std::string("config: invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorCode::kIo, "cannot open config " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

// ---- resolution -------------------------------------------------------------

Json resolved(const ScheduleSpec& s) { return {{"T", s.T}, {"beta_min", s.beta_min}, {"beta_max", s.beta_max}}; }

Json resolved(const DatasetSpec& d) {
  Json j{{"kind", d.kind}, {"seed", d.seed}};
  if (d.kind == "gmm-2d") {
    j["weights"] = d.weights;
    j["means"] = d.means;
    j["variances"] = d.variances;
    j["file"] = d.gmm_file;
  } else if (d.kind == "blobs-8x8" || d.kind == "blobs-16x16") {
    j["min_bumps"] = d.min_bumps;
    j["max_bumps"] = d.max_bumps;
  } else if (d.kind == "gaussian-field") {
    j["side"] = d.side;
    j["mean"] = d.field_mean;
    j["variance"] = d.field_variance;
    j["lengthscale"] = d.lengthscale;
    j["jitter"] = d.jitter;
  } else if (d.kind == "gmm-blobs") {
    j["side"] = d.blob_side;
    j["components"] = d.components;
    j["variance"] = d.component_variance;
    j["min_bumps"] = d.min_bumps;
    j["max_bumps"] = d.max_bumps;
  }
  return j;
}

Json resolved(const ModelSpec& m) {
  Json j{{"kind", m.kind}};
  if (m.kind == "mlp") {
    j["hidden"] = m.hidden;
    j["layers"] = m.layers;
    j["frequencies"] = m.frequencies;
    j["init_seed"] = m.init_seed;
    j["checkpoint"] = m.checkpoint;
    j["cache"] = m.cache;
    j["data_size"] = m.data_size;
    j["data_seed"] = m.data_seed;
    j["train"] = {{"iters", m.train.iters},
                  {"batch", m.train.batch},
                  {"lr", m.train.lr},
                  {"final_lr_fraction", m.train.final_lr_fraction},
                  {"seed", m.train.seed}};
  }
  return j;
}

namespace {

Json resolved(const OperatorSpec& o) {
  Json j{{"kind", o.kind}, {"scale", o.scale}};
  if (o.kind == "box-mask") {
    j["box"] = o.box;
  } else if (o.kind == "random-mask") {
    j["keep_prob"] = o.keep_prob;
    j["count"] = o.count;
    j["seed"] = o.seed;
  } else if (o.kind == "blur") {
    j["kernel"] = o.kernel;
    j["size"] = o.kernel_size;
    if (o.kernel == "gaussian") j["sigma"] = o.kernel_sigma;
    else j["seed"] = o.seed;
  } else if (o.kind == "downsample") {
    j["factor"] = o.factor;
  } else if (o.kind == "fourier") {
    j["pattern"] = o.pattern;
    j["acceleration"] = o.acceleration;
    j["seed"] = o.seed;
  } else if (o.kind == "phase-retrieval") {
    j["oversample"] = o.oversample;
  } else if (o.kind == "hdr") {
    j["factor"] = o.hdr_factor;
  }
  return j;
}

Json resolved(const NoiseSpec& n) {
  Json j{{"model", n.kind == NoiseKind::kGaussian ? "gaussian" : "poisson"}, {"sigma_y", n.sigma_y}};
  if (n.kind == NoiseKind::kPoisson) j["lambda_y"] = n.lambda_y;
  return j;
}

Json resolved(const CheckSpec& c) {
  Json j{{"name", c.name}, {"kind", c.kind}, {"metric", c.metric}, {"value", c.value}, {"acceptance", c.acceptance}};
  if (c.kind == "margin") {
    j["a"] = c.a;
    j["b"] = c.b;
  } else if (c.kind == "spread") {
    j["labels"] = c.labels;
  } else {
    j["label"] = c.label;
  }
  return j;
}

}  // namespace

Json resolved(const SamplerSpec& s) {
  const SamplerConfig& c = s.cfg;
  Json j{{"label", s.label},       {"variant", to_string(c.variant)},
         {"N", c.N},               {"K", c.K},
         {"lambda", c.lambda},     {"gamma", c.gamma},
         {"optimizer", to_string(c.optimizer)}, {"best_of_k", s.best_of_k},
         {"selector", s.selector}};
  if (s.delta) j["delta"] = *s.delta;
  else if (s.delta_multiplier) j["delta_multiplier"] = *s.delta_multiplier;
  else j["delta"] = "auto";
  if (c.variant == Variant::kSitcomOde) j["n_ode"] = c.n_ode;
  if (c.variant == Variant::kDps || c.variant == Variant::kDpsResample) {
    j["zeta"] = c.zeta;
    j["zeta_mode"] = to_string(c.zeta_mode);
  }
  if (c.variant == Variant::kSitcom || c.variant == Variant::kSitcomOde) j["remap"] = to_string(c.remap);
  return j;
}

Json resolved(const ExperimentConfig& c) {
  Json samplers = Json::array();
  for (const auto& s : c.samplers) samplers.push_back(resolved(s));
  Json checks = Json::array();
  for (const auto& k : c.checks) checks.push_back(resolved(k));
  return {{"name", c.name},
          {"output", c.output},
          {"seed", c.seed},
          {"workers", c.workers},
          {"repetitions", c.repetitions},
          {"problems", c.problems},
          {"problem_seed", c.problem_seed},
          {"write_images", c.write_images},
          {"schedule", resolved(c.schedule)},
          {"dataset", resolved(c.dataset)},
          {"model", resolved(c.model)},
          {"operator", resolved(c.op)},
          {"noise", resolved(c.noise)},
          {"samplers", samplers},
          {"sweep",
           {{"N", c.sweep.N},
            {"K", c.sweep.K},
            {"lambda", c.sweep.lambda},
            {"delta_multipliers", c.sweep.delta_multipliers},
            {"max_cells", c.sweep.max_cells}}},
          {"checks", checks}};
}

std::string fingerprint(const Json& j) {
  const std::string s = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace sitcom
