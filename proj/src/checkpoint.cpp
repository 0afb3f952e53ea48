#include "graphata/checkpoint.hpp"

#include "graphata/errors.hpp"
#include "graphata/text.hpp"

namespace graphata {

using nlohmann::ordered_json;

const Tensor& CheckpointFile::array(const std::string& name, std::size_t rows, std::size_t cols) const {
  for (const auto& [n, t] : arrays) {
    if (n != name) continue;
    if (t.rows() != rows || t.cols() != cols) {
      throw CheckpointError("checkpoint array '" + name + "' has shape " + shape_string(t.shape()) + ", expected [" +
                            std::to_string(rows) + "x" + std::to_string(cols) + "]");
    }
    return t;
  }
  throw CheckpointError("checkpoint is missing array '" + name + "'");
}

void write_checkpoint_file(const CheckpointFile& file, const std::string& path) {
  std::ofstream out = open_for_write(path);
  out << file.header.dump() << '\n';
  for (const auto& [name, t] : file.arrays) {
    if (t.rank() != 2) throw ShapeError("checkpoint arrays must be matrices: " + name);
    out << "array " << name << ' ' << t.rows() << ' ' << t.cols() << '\n';
    for (std::size_t r = 0; r < t.rows(); ++r) {
      const auto row = t.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) out << (c ? " " : "") << format_double(row[c]);
      out << '\n';
    }
  }
  out << "end\n";
  if (!out) throw IoError("write failed for '" + path + "'");
}

CheckpointFile read_checkpoint_file(const std::string& path) {
  LineReader in(path);
  CheckpointFile file;
  in.expect("header");
  try {
    file.header = ordered_json::parse(in.line());
  } catch (const nlohmann::json::exception& e) {
    in.fail(std::string("invalid header: ") + e.what());
  }
  if (!file.header.is_object()) in.fail("header must be a JSON object");
  while (true) {
    const auto fields = in.expect("'array' or 'end'");
    if (fields.size() == 1 && fields[0] == "end") break;
    if (fields.size() != 4 || fields[0] != "array") in.fail("expected 'array <name> <rows> <cols>' or 'end'");
    const std::string name(fields[1]);
    const std::size_t rows = in.parse_size(fields[2], "rows");
    const std::size_t cols = in.parse_size(fields[3], "cols");
    Tensor t({rows, cols});
    for (std::size_t r = 0; r < rows; ++r) {
      const auto values = in.expect("row " + std::to_string(r) + " of '" + name + "'");
      in.expect_count(values, cols, "row of '" + name + "'");
      for (std::size_t c = 0; c < cols; ++c) t(r, c) = in.parse_double(values[c], name);
    }
    file.arrays.emplace_back(name, std::move(t));
  }
  if (in.next()) in.fail("content after 'end'");
  return file;
}

ordered_json checkpoint_header(const std::string& kind, const GnnModel& shape_source) {
  ordered_json header;
  header["format"] = "graphata-checkpoint";
  header["version"] = kCheckpointVersion;
  header["kind"] = kind;
  header["backbone"] = to_string(shape_source.backbone());
  header["task"] = to_string(shape_source.task());
  header["dims"] = shape_source.dims();
  header["num_classes"] = shape_source.num_classes();
  return header;
}

void check_checkpoint_header(const ordered_json& header, const std::string& kind) {
  if (header.value("format", "") != "graphata-checkpoint") throw CheckpointError("not a graphata checkpoint");
  if (!header.contains("version") || !header["version"].is_number_integer()) {
    throw CheckpointError("checkpoint has no version field");
  }
  const int version = header["version"].get<int>();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  const std::string found = header.value("kind", "");
  if (found != kind) throw CheckpointError("expected a '" + kind + "' checkpoint, found '" + found + "'");
}

namespace {

GnnModel model_from_header(const ordered_json& header) {
  try {
    return GnnModel(parse_backbone(header.at("backbone").get<std::string>()),
                    parse_task(header.at("task").get<std::string>()),
                    header.at("dims").get<std::vector<std::size_t>>(), header.at("num_classes").get<int>());
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint header: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint header: ") + e.what());
  } catch (const UsageError& e) {
    throw CheckpointError(std::string("checkpoint header: ") + e.what());
  }
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  const GnnModel& model = checkpoint.model;
  const CheckpointMetadata& meta = checkpoint.metadata;
  CheckpointFile file;
  file.header = checkpoint_header("gnn", model);
  file.header["metadata"] = {{"source_name", meta.source_name}, {"seed", meta.seed},
                             {"epochs", meta.epochs},           {"best_epoch", meta.best_epoch},
                             {"val_accuracy", meta.val_accuracy}, {"test_accuracy", meta.test_accuracy}};
  for (std::size_t l = 0; l < model.num_layers(); ++l) file.arrays.emplace_back(model.layer(l).name, model.layer(l).value);
  file.arrays.emplace_back(model.classifier().name, model.classifier().value);
  write_checkpoint_file(file, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  const CheckpointFile file = read_checkpoint_file(path);
  check_checkpoint_header(file.header, "gnn");
  Checkpoint checkpoint{model_from_header(file.header), {}};
  GnnModel& model = checkpoint.model;
  for (Parameter* p : model.parameters()) p->value = file.array(p->name, p->value.rows(), p->value.cols());
  if (file.arrays.size() != model.num_layers() + 1) throw CheckpointError("checkpoint has unexpected extra arrays");
  try {
    const ordered_json& meta = file.header.at("metadata");
    CheckpointMetadata& out = checkpoint.metadata;
    out.source_name = meta.at("source_name").get<std::string>();
    out.seed = meta.at("seed").get<std::uint64_t>();
    out.epochs = meta.at("epochs").get<int>();
    out.best_epoch = meta.at("best_epoch").get<int>();
    out.val_accuracy = meta.at("val_accuracy").get<double>();
    out.test_accuracy = meta.at("test_accuracy").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint metadata: ") + e.what());
  }
  return checkpoint;
}

}  // namespace graphata
