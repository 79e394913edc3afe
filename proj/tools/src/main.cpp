// labelsynth command-line front end.
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <regex>
#include <thread>

#include "CLI11.hpp"
#include "labelsynth/arch.hpp"
#include "labelsynth/bundle.hpp"
#include "labelsynth/evaluation.hpp"
#include "labelsynth/png_io.hpp"
#include "labelsynth/service.hpp"
#include "labelsynth/shapes_world.hpp"
#include "labelsynth/style_catalog.hpp"
#include "labelsynth/synthesis.hpp"
#include "labelsynth/training.hpp"

using namespace labelsynth;
namespace fs = std::filesystem;

namespace {

std::pair<int, int> parse_size(const std::string& s) {
  static const std::regex re(R"((\d+)[xX](\d+))");
  std::smatch m;
  if (!std::regex_match(s, m, re)) throw ConfigError("expected HxW, got '" + s + "'");
  return {std::stoi(m[1]), std::stoi(m[2])};
}

void write_json(const std::string& path, const nlohmann::json& j) {
  const std::string text = j.dump(2) + "\n";
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  png::write_bytes_atomic(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  return nlohmann::json::parse(in);
}

std::optional<StyleCatalog> maybe_catalog(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return StyleCatalog::load(path);
}

int arch_inspect(const std::string& spec, const std::string& input, int divisor) {
  static const std::regex re(R"((\d+)[xX](\d+)[xX](\d+))");
  std::smatch m;
  if (!std::regex_match(input, m, re)) throw ConfigError("--input expects HxWxC, got '" + input + "'");
  const int h = std::stoi(m[1]), w = std::stoi(m[2]), c = std::stoi(m[3]);
  LayerGraph g = parse_arch(spec);
  if (divisor > 1) g = scale_width(g, divisor);
  const auto shapes = infer_shapes(g, h, w, c);
  std::printf("%-4s %-12s %8s %6s %6s %12s\n", "#", "layer", "planes", "h", "w", "params");
  int planes = c;
  for (std::size_t i = 0; i < g.layers.size(); ++i) {
    const auto& l = g.layers[i];
    const std::string name = l.implicit ? "<head>" : layer_token(l);
    std::printf("%-4zu %-12s %8d %6d %6d %12lld%s\n", i, name.c_str(), shapes[i].planes, shapes[i].height,
                shapes[i].width, static_cast<long long>(layer_param_count(l, planes)),
                g.fusion_point && *g.fusion_point == i ? "  (+ fusion)" : "");
    planes = shapes[i].planes;
  }
  std::printf("total parameters: %lld\nreceptive field: %d\n", static_cast<long long>(param_count(g, c)),
              receptive_field(g));
  return 0;
}

volatile std::sig_atomic_t g_stop = 0;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Label-map-conditioned image synthesis: data, training, evaluation, and serving"};
  app.require_subcommand(1);

  // make-dataset
  auto* mk = app.add_subcommand("make-dataset", "Generate a procedural shapes-world dataset");
  std::uint64_t mk_seed = 0;
  int mk_count = 100, mk_styles = 4;
  std::string mk_size = "128x256", mk_out;
  mk->add_option("--seed", mk_seed);
  mk->add_option("--count", mk_count);
  mk->add_option("--size", mk_size, "HxW, multiples of 32");
  mk->add_option("--styles", mk_styles, "Styles per class");
  mk->add_option("--out", mk_out)->required();

  // arch inspect
  auto* arch = app.add_subcommand("arch", "Architecture notation tools");
  arch->require_subcommand(1);
  auto* inspect = arch->add_subcommand("inspect", "Print the shape table and receptive field");
  std::string arch_spec, arch_input = "256x256x3";
  int arch_divisor = 1;
  inspect->add_option("spec", arch_spec)->required();
  inspect->add_option("--input", arch_input, "HxWxC");
  inspect->add_option("--divisor", arch_divisor, "Width divisor");

  // train
  auto* train = app.add_subcommand("train", "Run the phased training schedule");
  std::string tr_config, tr_dataset, tr_out, tr_resume;
  bool tr_force = false;
  int tr_limit = 0;
  train->add_option("--config", tr_config)->required();
  train->add_option("--dataset", tr_dataset)->required();
  train->add_option("--out", tr_out)->required();
  train->add_option("--resume", tr_resume);
  train->add_flag("--force", tr_force, "Resume despite a config hash mismatch");
  train->add_option("--limit", tr_limit, "Use only the first N samples");

  // encode-features
  auto* enc = app.add_subcommand("encode-features", "Harvest per-instance style features with a trained encoder");
  std::string enc_bundle, enc_dataset, enc_out;
  enc->add_option("--bundle", enc_bundle)->required();
  enc->add_option("--dataset", enc_dataset)->required();
  enc->add_option("--out", enc_out)->required();

  // cluster-features
  auto* clu = app.add_subcommand("cluster-features", "Per-class K-means over harvested features");
  std::string clu_features, clu_out;
  int clu_k = 10, clu_classes = 0;
  std::uint64_t clu_seed = 0;
  clu->add_option("--features", clu_features)->required();
  clu->add_option("--k", clu_k);
  clu->add_option("--seed", clu_seed);
  clu->add_option("--num-classes", clu_classes);
  clu->add_option("--out", clu_out)->required();

  // train-oracle
  auto* orc = app.add_subcommand("train-oracle", "Train the segmentation oracle on real images");
  std::string orc_dataset, orc_out;
  OracleOptions orc_opts;
  int orc_holdout = 0;
  orc->add_option("--dataset", orc_dataset)->required();
  orc->add_option("--out", orc_out)->required();
  orc->add_option("--epochs", orc_opts.epochs);
  orc->add_option("--lr", orc_opts.lr);
  orc->add_option("--seed", orc_opts.seed);
  orc->add_option("--holdout", orc_holdout, "Last N samples held out for the accuracy report");

  // eval-seg
  auto* ev = app.add_subcommand("eval-seg", "Score synthesized images with the oracle");
  std::string ev_bundle, ev_dataset, ev_oracle, ev_out = "-", ev_catalog;
  std::uint64_t ev_seed = 0;
  ev->add_option("--bundle", ev_bundle)->required();
  ev->add_option("--dataset", ev_dataset)->required();
  ev->add_option("--oracle", ev_oracle)->required();
  ev->add_option("--catalog", ev_catalog);
  ev->add_option("--style-seed", ev_seed);
  ev->add_option("--out", ev_out);

  // ablation
  auto* abl = app.add_subcommand("ablation", "Compare trained variants under the oracle protocol");
  std::vector<std::string> abl_variants;
  std::string abl_dataset, abl_oracle, abl_out = "-";
  abl->add_option("--variant", abl_variants, "name=bundle.lsb (repeatable)")->required();
  abl->add_option("--dataset", abl_dataset)->required();
  abl->add_option("--oracle", abl_oracle)->required();
  abl->add_option("--out", abl_out);

  // synthesize
  auto* syn = app.add_subcommand("synthesize", "Render one image from label/instance PNGs");
  std::string syn_bundle, syn_label, syn_instance, syn_out, syn_catalog;
  std::uint64_t syn_seed = 0;
  syn->add_option("--bundle", syn_bundle)->required();
  syn->add_option("--label", syn_label)->required();
  syn->add_option("--instance", syn_instance)->required();
  syn->add_option("--catalog", syn_catalog);
  syn->add_option("--seed", syn_seed);
  syn->add_option("--out", syn_out)->required();

  // serve
  auto* srv = app.add_subcommand("serve", "HTTP synthesis service");
  std::string srv_bundle, srv_catalog, srv_host = "127.0.0.1", srv_max = "256x512", srv_static;
  int srv_port = 8080;
  ServiceOptions srv_opts;
  srv->add_option("--bundle", srv_bundle)->required();
  srv->add_option("--catalog", srv_catalog);
  srv->add_option("--host", srv_host);
  srv->add_option("--port", srv_port);
  srv->add_option("--max-size", srv_max, "HxW");
  srv->add_option("--static", srv_static, "Editor assets served at /");
  srv->add_option("--slots", srv_opts.compute_slots, "Concurrent syntheses");
  srv->add_option("--queue", srv_opts.queue_capacity, "Admitted requests before 429");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*mk) {
      const auto [h, w] = parse_size(mk_size);
      const Dataset d = generate_shapes_dataset({mk_seed, mk_count, h, w, mk_styles, 0});
      save_dataset(mk_out, d);
      std::printf("wrote %zu samples to %s\n", d.size(), mk_out.c_str());
    } else if (*inspect) {
      return arch_inspect(arch_spec, arch_input, arch_divisor);
    } else if (*train) {
      const TrainConfig cfg = TrainConfig::load(tr_config);
      Dataset d = load_dataset(tr_dataset);
      if (tr_limit > 0) d = d.split(static_cast<std::size_t>(tr_limit)).first;
      GanModel<float> model(cfg.model);
      RunOptions opts{tr_out, tr_resume, tr_force, [](const StepLog& s) {
                        if (s.step % 25 == 0)
                          std::printf("step %lld phase %d epoch %d lr %.2e g %.4f d %.4f\n",
                                      static_cast<long long>(s.step), s.phase, s.epoch, s.lr, s.losses.g_total,
                                      s.losses.d_total);
                      }};
      const RunResult r = run_schedule(cfg, d, model, opts);
      save_bundle((fs::path(tr_out) / "final.lsb").string(),
                  bundle_from_model(model, {{"config_hash", cfg.hash()}, {"config", cfg.to_json()},
                                            {"class_names", d.meta.value("class_names", nlohmann::json::array())}}));
      std::printf("trained %lld steps; %zu checkpoints\n", static_cast<long long>(r.steps), r.checkpoints.size());
    } else if (*enc) {
      const GanModel<float> model = model_from_bundle(load_bundle(enc_bundle));
      const auto features = harvest_features(model, load_dataset(enc_dataset));
      nlohmann::json j = nlohmann::json::array();
      for (const auto& f : features)
        j.push_back({{"sample", f.sample_id}, {"instance_id", f.instance_id}, {"class_id", f.class_id},
                     {"vector", f.vector}, {"pixels", f.pixels}});
      write_json(enc_out, {{"num_classes", model.spec.num_classes}, {"features", j}});
    } else if (*clu) {
      const nlohmann::json j = read_json(clu_features);
      std::vector<InstanceFeature> features;
      for (const auto& f : j.at("features"))
        features.push_back({f.at("sample").get<std::string>(), f.at("instance_id").get<int32_t>(),
                            f.at("class_id").get<int32_t>(), f.at("vector").get<StyleVector>(), f.value("pixels", 0)});
      const int classes = clu_classes > 0 ? clu_classes : j.value("num_classes", 0);
      build_style_catalog(features, {clu_k, clu_seed, 300, 1e-6}, classes).save(clu_out);
    } else if (*orc) {
      Dataset d = load_dataset(orc_dataset);
      const std::size_t train_n = d.size() - std::min<std::size_t>(d.size(), static_cast<std::size_t>(orc_holdout));
      auto [tr, held] = d.split(train_n);
      OracleSegmenter o = train_oracle(tr, orc_opts, [](int e, double loss) { std::printf("epoch %d loss %.4f\n", e, loss); });
      if (!held.empty()) {
        const SegScores s = score_real_images(o, held);
        o.provenance["holdout"] = s.to_json();
        std::printf("held-out pixel accuracy %.4f, mean IoU %.4f\n", s.pixel_accuracy, s.mean_iou);
      }
      o.save(orc_out);
    } else if (*ev) {
      const GanModel<float> model = model_from_bundle(load_bundle(ev_bundle));
      const auto catalog = maybe_catalog(ev_catalog);
      const EvalReport r = evaluate_model(model, load_dataset(ev_dataset), OracleSegmenter::load(ev_oracle),
                                          {catalog ? &*catalog : nullptr, ev_seed});
      write_json(ev_out, r.to_json());
    } else if (*abl) {
      std::vector<std::unique_ptr<GanModel<float>>> models;
      std::vector<std::pair<std::string, const GanModel<float>*>> named;
      for (const auto& v : abl_variants) {
        const auto eq = v.find('=');
        if (eq == std::string::npos) throw ConfigError("--variant expects name=path, got '" + v + "'");
        models.push_back(std::make_unique<GanModel<float>>(model_from_bundle(load_bundle(v.substr(eq + 1)))));
        named.emplace_back(v.substr(0, eq), models.back().get());
      }
      const auto rows = ablation_compare(named, load_dataset(abl_dataset), OracleSegmenter::load(abl_oracle));
      std::fputs(ablation_table_text(rows).c_str(), stderr);
      write_json(abl_out, ablation_table_json(rows));
    } else if (*syn) {
      const GanModel<float> model = model_from_bundle(load_bundle(syn_bundle));
      const png::Raster lr = png::read_file(syn_label), ir = png::read_file(syn_instance);
      LabelMap label(lr.height, lr.width, model.spec.num_classes);
      label.grid.assign(lr.samples.begin(), lr.samples.end());
      InstanceMap inst(ir.height, ir.width);
      inst.grid.assign(ir.samples.begin(), ir.samples.end());
      StyleVectors styles;
      if (model.spec.use_encoder) {
        const auto catalog = maybe_catalog(syn_catalog);
        if (!catalog) throw ConfigError("this model needs --catalog");
        styles = sample_styles(*catalog, label, inst, {}, syn_seed);
      }
      const Tensor<float> img = synthesize(model, label, inst, model.spec.use_encoder ? &styles : nullptr);
      png::write_file(syn_out, {img.h(), img.w(), 3, 8, rgb8_samples(img)});
    } else if (*srv) {
      const auto [mh, mw] = parse_size(srv_max);
      srv_opts.max_height = mh;
      srv_opts.max_width = mw;
      srv_opts.static_dir = srv_static;
      SynthesisService service(srv_opts);
      std::signal(SIGINT, [](int) { g_stop = 1; });
      std::signal(SIGTERM, [](int) { g_stop = 1; });
      const int port = service.start(srv_host, srv_port);
      std::printf("listening on %s:%d (loading model)\n", srv_host.c_str(), port);
      std::fflush(stdout);
      const Bundle b = load_bundle(srv_bundle);
      service.load(model_from_bundle(b), maybe_catalog(srv_catalog), b.manifest);
      std::printf("model loaded\n");
      std::fflush(stdout);
      // start() serves on a background thread; park until a signal arrives.
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(200));
      service.stop();
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
