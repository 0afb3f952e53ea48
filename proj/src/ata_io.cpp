#include "graphata/ata.hpp"
#include "graphata/checkpoint.hpp"
#include "graphata/errors.hpp"

namespace graphata {

using nlohmann::ordered_json;

namespace {

std::string source_array(std::size_t i, const Parameter& p) { return "source" + std::to_string(i) + "." + p.name; }

}  // namespace

void save_ata_model(const AtaModel& model, const std::string& path) {
  const AtaOptions& opt = model.options();
  CheckpointFile file;
  file.header = checkpoint_header("ata", model.reference());
  file.header["num_sources"] = model.num_sources();
  file.header["options"] = {{"mode", to_string(opt.mode)},
                            {"normalizer", to_string(opt.normalizer)},
                            {"context", to_string(opt.pooling)},
                            {"context_scaling", to_string(opt.scaling)},
                            {"lambda", opt.lambda},
                            {"trainable_sources", opt.trainable_sources},
                            {"force_unit_context", opt.force_unit_context},
                            {"drop_global", opt.drop_global}};
  for (std::size_t i = 0; i < model.num_sources(); ++i)
    for (std::size_t l = 0; l < model.num_stages(); ++l) {
      const Parameter& p = model.source_matrix(i, l);
      file.arrays.emplace_back(source_array(i, p), p.value);
    }
  for (std::size_t l = 0; l < model.num_stages(); ++l) {
    file.arrays.emplace_back(model.stage(l).attention.name, model.stage(l).attention.value);
    file.arrays.emplace_back(model.stage(l).global.name, model.stage(l).global.value);
  }
  file.arrays.emplace_back(model.model_scores().name, model.model_scores().value);
  write_checkpoint_file(file, path);
}

AtaModel load_ata_model(const std::string& path) {
  const CheckpointFile file = read_checkpoint_file(path);
  check_checkpoint_header(file.header, "ata");
  AtaOptions opt;
  std::vector<GnnModel> sources;
  try {
    const ordered_json& h = file.header;
    const std::size_t m = h.at("num_sources").get<std::size_t>();
    if (m == 0) throw CheckpointError("ata checkpoint declares zero sources");
    for (std::size_t i = 0; i < m; ++i) {
      sources.emplace_back(parse_backbone(h.at("backbone").get<std::string>()),
                           parse_task(h.at("task").get<std::string>()), h.at("dims").get<std::vector<std::size_t>>(),
                           h.at("num_classes").get<int>());
    }
    const ordered_json& o = h.at("options");
    opt.mode = parse_mode(o.at("mode").get<std::string>());
    opt.normalizer = parse_normalizer(o.at("normalizer").get<std::string>());
    opt.pooling = parse_pooling(o.at("context").get<std::string>());
    opt.scaling = parse_scaling(o.at("context_scaling").get<std::string>());
    opt.lambda = o.at("lambda").get<double>();
    opt.trainable_sources = o.at("trainable_sources").get<bool>();
    opt.force_unit_context = o.at("force_unit_context").get<bool>();
    opt.drop_global = o.at("drop_global").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("ata checkpoint header: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("ata checkpoint header: ") + e.what());
  } catch (const UsageError& e) {
    throw CheckpointError(std::string("ata checkpoint header: ") + e.what());
  }

  for (std::size_t i = 0; i < sources.size(); ++i)
    for (Parameter* p : sources[i].parameters())
      p->value = file.array(source_array(i, *p), p->value.rows(), p->value.cols());
  AtaModel model(std::move(sources), opt);
  auto load = [&](Parameter& p) { p.value = file.array(p.name, p.value.rows(), p.value.cols()); };
  for (std::size_t l = 0; l < model.num_stages(); ++l) {
    load(model.stage(l).attention);
    load(model.stage(l).global);
  }
  load(model.model_scores());
  const std::size_t expected = model.num_sources() * model.num_stages() + 2 * model.num_stages() + 1;
  if (file.arrays.size() != expected) throw CheckpointError("ata checkpoint has unexpected extra arrays");
  return model;
}

}  // namespace graphata
