#include "mixlaw/bundle.hpp"

#include <unistd.h>

#include <fstream>
#include <set>
#include <sstream>

#include "mixlaw/json_io.hpp"

namespace mixlaw {

using nlohmann::json;

const FractionCurveFit* TaskBundle::fraction(FractionForm form) const {
  for (const auto& f : fraction_fits)
    if (f.fit.form == form) return &f;
  return nullptr;
}

bool LawBundle::has_task(std::string_view name) const {
  for (const auto& t : tasks)
    if (t.task().name == name) return true;
  return false;
}

const TaskBundle& LawBundle::task(std::string_view name) const {
  for (const auto& t : tasks)
    if (t.task().name == name) return t;
  fail(ErrorCode::missing_task, "bundle has no task '" + std::string(name) + "'");
}

void LawBundle::validate() const {
  std::set<std::string> names;
  for (const auto& t : tasks) {
    if (!names.insert(t.task().name).second)
      fail(ErrorCode::invariant_violation, "task '" + t.task().name + "' appears twice in the bundle");
    std::set<FractionForm> forms;
    for (const auto& f : t.fraction_fits) {
      if (f.fit.task != t.task())
        fail(ErrorCode::invariant_violation, "fraction fit for '" + f.fit.task.name + "' stored under '" +
                                                 t.task().name + "'");
      if (!forms.insert(f.fit.form).second)
        fail(ErrorCode::invariant_violation, "two " + std::string(to_string(f.fit.form)) +
                                                 " fraction fits for '" + t.task().name + "'");
      if (!t.joint.has_baseline())
        fail(ErrorCode::missing_baseline, "task '" + t.task().name + "' has a fraction fit but no p=1 beta");
    }
  }
}

namespace {

// ---- encoding ----

json encode(const TaskId& t) { return {{"name", t.name}, {"direction_tag", t.direction_tag}}; }

json encode(const PowerLawParams& p) {
  return {{"beta", p.beta}, {"alpha", p.alpha}, {"l_inf", p.l_inf}};
}

template <class T, class F>
json encode_keyed(const std::map<WeightKey, T>& m, F&& fn) {
  json out = json::object();
  for (const auto& [k, v] : m) out[k.to_string()] = fn(v);
  return out;
}

json encode(const FitDiagnostics& d) {
  json residuals = json::array();
  for (double r : d.residuals) residuals.push_back(number_or_null(r));
  json per = json::array();
  for (const auto& [k, r2] : d.per_weighting_r_squared)
    per.push_back({{"p", k.to_string()}, {"r_squared", number_or_null(r2)}});
  return {{"sse", number_or_null(d.sse)},
          {"r_squared", number_or_null(d.r_squared)},
          {"n_points", d.n_points},
          {"n_params", d.n_params},
          {"converged", d.converged},
          {"residuals", std::move(residuals)},
          {"per_weighting_r_squared", std::move(per)}};
}

json encode(const TaskBundle& t) {
  json fractions = json::array();
  for (const auto& f : t.fraction_fits)
    fractions.push_back({{"form", std::string(to_string(f.fit.form))},
                         {"c1", f.fit.c1},
                         {"c2", f.fit.c2},
                         {"c3", f.fit.c3},
                         {"diagnostics", encode(f.diagnostics)}});
  json std_devs = json::object();
  for (const auto& [name, sd] : t.uncertainty.std_devs) std_devs[name] = number_or_null(sd);
  json observations = json::array();
  for (const auto& o : t.observations)
    observations.push_back({{"run_id", o.run_id}, {"n", o.n}, {"p", o.p}, {"y", o.y}, {"corrected", o.corrected}});
  return {
      {"task", encode(t.joint.task)},
      {"joint",
       {{"alpha", t.joint.alpha},
        {"l_inf", t.joint.l_inf},
        {"betas", encode_keyed(t.joint.betas, [](double b) { return json(b); })}}},
      {"joint_diagnostics", encode(t.joint_diagnostics)},
      {"single_task", encode(t.single_task)},
      {"effective_fractions", encode_keyed(t.effective_fractions, [](double f) { return json(f); })},
      {"fraction_fits", std::move(fractions)},
      {"per_weighting", encode_keyed(t.per_weighting,
                                     [](const PowerLawFit& f) {
                                       return json{{"params", encode(f.params)},
                                                   {"diagnostics", encode(f.diagnostics)}};
                                     })},
      {"uncertainty",
       {{"std_devs", std::move(std_devs)},
        {"replicate_count", t.uncertainty.replicate_count},
        {"failed_replicates", t.uncertainty.failed_replicates},
        {"sigma_fraction", t.uncertainty.sigma_fraction}}},
      {"observations", std::move(observations)},
  };
}

json encode_body(const LawBundle& b) {
  json tasks = json::array();
  for (const auto& t : b.tasks) tasks.push_back(encode(t));
  json config = json::object();
  for (const auto& [k, v] : b.provenance.config) config[k] = v;
  return {{"schema_version", b.schema_version},
          {"metric", b.metric},
          {"direction", std::string(to_string(b.direction))},
          {"testset", b.testset},
          {"tasks", std::move(tasks)},
          {"provenance",
           {{"dataset_hash", b.provenance.dataset_hash},
            {"config", std::move(config)},
            {"tool_version", b.provenance.tool_version}}}};
}

// ---- decoding ----

const json& at(const json& obj, const char* key) {
  if (!obj.is_object()) fail(ErrorCode::corruption, std::string("expected an object holding '") + key + "'");
  auto it = obj.find(key);
  if (it == obj.end()) fail(ErrorCode::corruption, std::string("bundle lacks field '") + key + "'");
  return *it;
}

double num(const json& obj, const char* key) { return number_from(at(obj, key)); }

std::string str(const json& obj, const char* key) {
  const auto& v = at(obj, key);
  if (!v.is_string()) fail(ErrorCode::corruption, std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

int integer(const json& obj, const char* key) {
  const auto& v = at(obj, key);
  if (!v.is_number_integer()) fail(ErrorCode::corruption, std::string("field '") + key + "' must be an integer");
  return v.get<int>();
}

bool boolean(const json& obj, const char* key) {
  const auto& v = at(obj, key);
  if (!v.is_boolean()) fail(ErrorCode::corruption, std::string("field '") + key + "' must be a boolean");
  return v.get<bool>();
}

TaskId decode_task(const json& j) { return TaskId(str(j, "name"), str(j, "direction_tag")); }

PowerLawParams decode_params(const json& j) { return {num(j, "beta"), num(j, "alpha"), num(j, "l_inf")}; }

template <class T, class F>
std::map<WeightKey, T> decode_keyed(const json& j, F&& fn) {
  if (!j.is_object()) fail(ErrorCode::corruption, "expected an object keyed by weighting");
  std::map<WeightKey, T> out;
  for (const auto& [k, v] : j.items()) out.emplace(WeightKey::parse(k), fn(v));
  return out;
}

FitDiagnostics decode_diagnostics(const json& j) {
  FitDiagnostics d;
  d.sse = num(j, "sse");
  d.r_squared = num(j, "r_squared");
  d.n_points = integer(j, "n_points");
  d.n_params = integer(j, "n_params");
  d.converged = boolean(j, "converged");
  for (const auto& r : at(j, "residuals")) d.residuals.push_back(number_from(r));
  for (const auto& e : at(j, "per_weighting_r_squared"))
    d.per_weighting_r_squared.emplace_back(WeightKey::parse(str(e, "p")), num(e, "r_squared"));
  return d;
}

TaskBundle decode_task_bundle(const json& j, MetricDirection direction) {
  const TaskId task = decode_task(at(j, "task"));
  const auto& joint = at(j, "joint");
  TaskBundle t{
      JointLaw(task, num(joint, "alpha"), num(joint, "l_inf"),
               decode_keyed<double>(at(joint, "betas"), [](const json& v) { return number_from(v); }), direction),
      decode_diagnostics(at(j, "joint_diagnostics")),
      decode_params(at(j, "single_task")),
      decode_keyed<double>(at(j, "effective_fractions"), [](const json& v) { return number_from(v); }),
      {},
      decode_keyed<PowerLawFit>(at(j, "per_weighting"),
                                [](const json& v) {
                                  return PowerLawFit{decode_params(at(v, "params")),
                                                     decode_diagnostics(at(v, "diagnostics"))};
                                }),
      {},
      {},
  };
  for (const auto& f : at(j, "fraction_fits")) {
    const auto form = parse_fraction_form(str(f, "form"));
    FractionFit fit = form == FractionForm::flexible
                          ? FractionFit::flexible(task, num(f, "c1"), num(f, "c2"), num(f, "c3"))
                          : FractionFit::linear(task, num(f, "c1"));
    t.fraction_fits.push_back({std::move(fit), decode_diagnostics(at(f, "diagnostics"))});
  }
  const auto& u = at(j, "uncertainty");
  for (const auto& [name, sd] : at(u, "std_devs").items()) t.uncertainty.std_devs[name] = number_from(sd);
  t.uncertainty.replicate_count = integer(u, "replicate_count");
  t.uncertainty.failed_replicates = integer(u, "failed_replicates");
  t.uncertainty.sigma_fraction = num(u, "sigma_fraction");
  for (const auto& o : at(j, "observations"))
    t.observations.push_back({str(o, "run_id"), num(o, "n"), num(o, "p"), num(o, "y"), boolean(o, "corrected")});
  return t;
}

LawBundle decode_body(const json& body) {
  LawBundle b;
  b.schema_version = integer(body, "schema_version");
  b.metric = str(body, "metric");
  b.direction = parse_direction(str(body, "direction"));
  b.testset = str(body, "testset");
  for (const auto& t : at(body, "tasks")) b.tasks.push_back(decode_task_bundle(t, b.direction));
  const auto& prov = at(body, "provenance");
  b.provenance.dataset_hash = str(prov, "dataset_hash");
  for (const auto& [k, v] : at(prov, "config").items()) {
    if (!v.is_string()) fail(ErrorCode::corruption, "provenance config values must be strings");
    b.provenance.config[k] = v.get<std::string>();
  }
  b.provenance.tool_version = str(prov, "tool_version");
  return b;
}

}  // namespace

std::string to_document(const LawBundle& bundle) {
  bundle.validate();
  json body = encode_body(bundle);
  json doc = {{"schema_version", bundle.schema_version},
              {"sha256", sha256_hex(canonical_dump(body))},
              {"body", std::move(body)}};
  return canonical_dump(doc, 2) + "\n";
}

LawBundle from_document(std::string_view text, int expected_version) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::corruption, std::string("bundle is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) fail(ErrorCode::corruption, "bundle document must be a JSON object");
  const int version = integer(doc, "schema_version");
  if (version != expected_version)
    fail(ErrorCode::version_mismatch, "bundle schema version " + std::to_string(version) + ", reader expects " +
                                          std::to_string(expected_version));
  const auto& body = at(doc, "body");
  if (str(doc, "sha256") != sha256_hex(canonical_dump(body)))
    fail(ErrorCode::corruption, "bundle checksum mismatch");
  try {
    LawBundle b = decode_body(body);
    if (b.schema_version != version) fail(ErrorCode::corruption, "schema version in body disagrees with header");
    b.validate();
    return b;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::corruption) throw;
    fail(ErrorCode::corruption, std::string("malformed bundle body: ") + e.what());
  } catch (const json::exception& e) {
    fail(ErrorCode::corruption, std::string("malformed bundle body: ") + e.what());
  }
}

void save_bundle(const LawBundle& bundle, const std::filesystem::path& path) {
  const std::string text = to_document(bundle);
  auto tmp = path;
  tmp += ".tmp-" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io_error, "cannot write '" + tmp.string() + "'");
    out << text;
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      fail(ErrorCode::io_error, "write to '" + tmp.string() + "' failed");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    fail(ErrorCode::io_error, "cannot replace '" + path.string() + "': " + ec.message());
  }
}

LawBundle load_bundle(const std::filesystem::path& path, int expected_version) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io_error, "cannot open bundle '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return from_document(text.str(), expected_version);
}

}  // namespace mixlaw
