#include "cnenet/cnenet.h"

#include <algorithm>
#include <cstring>
#include <new>
#include <string>

#include <json.hpp>

#include "cnenet/error.hpp"
#include "cnenet/experiment.hpp"
#include "cnenet/metrics.hpp"
#include "cnenet/model.hpp"

struct cne_model {
  cne::Model model;
};

struct cne_dataset {
  cne::Dataset dataset;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
cne_status guarded(F&& f) {
  g_last_error.clear();
  try {
    f();
    return CNE_OK;
  } catch (const cne::Error& e) {
    g_last_error = e.what();
    return static_cast<cne_status>(static_cast<int>(e.code()));
  } catch (const nlohmann::json::exception& e) {
    g_last_error = std::string("json: ") + e.what();
    return CNE_ERR_DATA;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return CNE_ERR_INTERNAL;
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return CNE_ERR_IO;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return CNE_ERR_OTHER;
  } catch (...) {
    g_last_error = "unknown failure";
    return CNE_ERR_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(const void* p, const char* what) {
  if (!p) throw cne::ConfigError(std::string(what) + " must not be null");
}

void emit(char** out, const std::string& s) {
  if (out) *out = dup_string(s);
}

}  // namespace

extern "C" {

const char* cne_last_error(void) { return g_last_error.c_str(); }

const char* cne_version(void) { return "1.0.0"; }

void cne_string_free(char* s) { std::free(s); }

cne_status cne_cmd_convert(const char* format, const char* in_path, const char* out_path, char** result_json) {
  return guarded([&] {
    require(format, "format");
    require(in_path, "input path");
    require(out_path, "output path");
    emit(result_json, cne::cmd_convert(format, in_path, out_path));
  });
}

cne_status cne_cmd_run(const char* command, const char* config_path, const char* overrides_json,
                       char** result_json) {
  return guarded([&] {
    require(command, "command");
    require(config_path, "config path");
    static constexpr std::string_view kCommands[] = {"generate", "split", "train", "forgetting"};
    if (std::find(std::begin(kCommands), std::end(kCommands), std::string_view(command)) == std::end(kCommands)) {
      throw cne::ConfigError("unknown command \"" + std::string(command) +
                             "\" (expected generate | split | train | forgetting)");
    }
    const std::filesystem::path path(config_path);
    const auto text = cne::apply_overrides(cne::read_text_file(path), overrides_json ? overrides_json : "{}");
    const auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    const auto config = cne::config_from_json(text, base);
    const std::string cmd(command);
    std::string out;
    if (cmd == "generate") {
      out = cne::cmd_generate(config);
    } else if (cmd == "split") {
      out = cne::cmd_split(config);
    } else if (cmd == "train") {
      out = cne::cmd_train(config);
    } else if (cmd == "forgetting") {
      out = cne::cmd_forgetting(config);
    } else {
      throw cne::ConfigError("unknown command \"" + cmd + "\"");
    }
    emit(result_json, out);
  });
}

cne_status cne_cmd_eval(const char* checkpoint_path, const char* dataset_path, const char* group,
                        const char* schema_path, double threshold, const char* out_path, char** result_json) {
  return guarded([&] {
    require(checkpoint_path, "checkpoint path");
    require(dataset_path, "dataset path");
    std::optional<std::filesystem::path> schema, out;
    if (schema_path) schema = schema_path;
    if (out_path) out = out_path;
    emit(result_json, cne::cmd_eval(checkpoint_path, dataset_path, group ? group : "all", schema, threshold, out));
  });
}

cne_status cne_model_load(const char* checkpoint_path, cne_model** out) {
  return guarded([&] {
    require(checkpoint_path, "checkpoint path");
    require(out, "output handle");
    *out = nullptr;
    *out = new cne_model{cne::load_checkpoint(checkpoint_path)};
  });
}

void cne_model_free(cne_model* model) { delete model; }

size_t cne_model_num_categories(const cne_model* model) { return model ? model->model.schema.size() : 0; }

size_t cne_model_num_polarities(const cne_model* model) { return model ? model->model.polarities.size() : 0; }

cne_status cne_model_info(const cne_model* model, char** info_json) {
  return guarded([&] {
    require(model, "model");
    require(info_json, "output string");
    const auto& m = model->model;
    nlohmann::ordered_json j;
    j["checkpoint_id"] = m.checkpoint_id();
    j["head"] = cne::to_string(m.head);
    j["decoder"] = cne::to_string(m.decoder.mode());
    j["categories"] = m.schema.categories();
    j["polarities"] = m.polarities.labels();
    j["config_fingerprint"] = m.provenance.config_fingerprint;
    j["lineage"] = m.provenance.lineage;
    j["parent_checkpoint"] = m.provenance.parent_checkpoint;
    j["stage"] = m.provenance.stage;
    *info_json = dup_string(j.dump(2));
  });
}

cne_status cne_model_predict(const cne_model* model, const char* text, double* probs, size_t capacity) {
  return guarded([&] {
    require(model, "model");
    require(text, "text");
    require(probs, "output buffer");
    const auto& m = model->model;
    const size_t need = m.schema.size() * m.polarities.size();
    if (capacity < need) {
      throw cne::DimensionError("output buffer holds " + std::to_string(capacity) + " values, " +
                                std::to_string(need) + " needed");
    }
    const auto p = cne::predict_one(m, m.encode_text(text));
    std::copy(p.data().begin(), p.data().end(), probs);
  });
}

cne_status cne_dataset_load(const char* dataset_path, const char* schema_path, cne_dataset** out) {
  return guarded([&] {
    require(dataset_path, "dataset path");
    require(schema_path, "schema path");
    require(out, "output handle");
    *out = nullptr;
    const auto sf = cne::load_schema(schema_path);
    *out = new cne_dataset{cne::load_dataset(dataset_path, sf.schema, sf.polarities, cne::SplitTag::kTest)};
  });
}

void cne_dataset_free(cne_dataset* dataset) { delete dataset; }

size_t cne_dataset_size(const cne_dataset* dataset) { return dataset ? dataset->dataset.size() : 0; }

cne_status cne_evaluate(const cne_model* model, const cne_dataset* dataset, const char* group, double threshold,
                        char** report_json) {
  return guarded([&] {
    require(model, "model");
    require(dataset, "dataset");
    require(report_json, "output string");
    const auto& m = model->model;
    const auto g = cne::parse_category_group(group ? group : "all");
    auto preds = cne::predict(m, dataset->dataset).restricted(cne::group_indices(m.schema, g));
    *report_json = dup_string(cne::report_to_json(cne::evaluate(preds, std::string(cne::to_string(g)), threshold)));
  });
}

}  // extern "C"
