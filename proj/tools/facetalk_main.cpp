// Copyright 2026 FaceTalk Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>

#include "facetalk/data.hpp"
#include "facetalk/error.hpp"
#include "facetalk/pipeline.hpp"

namespace {

// FACETALK_OUT overrides any output directory argument.
std::string output_override(const std::string& fallback) {
  const char* env = std::getenv("FACETALK_OUT");
  return env != nullptr && *env != '\0' ? std::string(env) : fallback;
}

void emit_error(const std::string& code, const std::string& message) {
  nlohmann::json j = {{"error", code}, {"message", message}};
  std::cerr << j.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"facetalk: voiced talking-head synthesis from text and one face image"};
  app.require_subcommand(1);

  // ---- data synth / data assets ----
  CLI::App* data_cmd = app.add_subcommand("data", "synthetic corpus and asset tools");
  data_cmd->require_subcommand(1);

  uint64_t synth_seed = 1;
  int synth_ids = 4, synth_clips = 8;
  double synth_seconds = 3.0;
  std::string synth_out = "corpus";
  CLI::App* synth = data_cmd->add_subcommand("synth", "generate a synthetic corpus");
  synth->add_option("--seed", synth_seed, "master seed")->required();
  synth->add_option("--ids", synth_ids, "identity count");
  synth->add_option("--clips", synth_clips, "clips per identity");
  synth->add_option("--seconds", synth_seconds, "clip duration in seconds");
  synth->add_option("--out", synth_out, "corpus output directory");

  std::string assets_out = "assets";
  CLI::App* assets = data_cmd->add_subcommand("assets", "write versioned JSON assets");
  assets->add_option("--out", assets_out, "asset output directory");

  // ---- train ----
  std::string train_stage_name, train_config;
  bool train_resume = false;
  int64_t train_max_steps = 0;
  CLI::App* train = app.add_subcommand("train", "train one pipeline stage");
  train->add_option("stage", train_stage_name, "face_voice | tts | landmark | renderer")
      ->required();
  train->add_option("--config", train_config, "pipeline config JSON")->required();
  train->add_flag("--resume", train_resume, "continue from the stage checkpoint");
  train->add_option("--max-steps", train_max_steps, "cap the steps run by this invocation");

  // ---- generate ----
  std::string gen_config, gen_text, gen_face, gen_landmarks, gen_out;
  CLI::App* gen = app.add_subcommand("generate", "synthesize audio + frames");
  gen->add_option("--config", gen_config, "pipeline config JSON")->required();
  gen->add_option("--text", gen_text, "input text")->required();
  gen->add_option("--face", gen_face, "face image PNG")->required();
  gen->add_option("--landmarks", gen_landmarks, "landmark JSON for the face image")->required();
  gen->add_option("--out", gen_out, "output bundle directory");

  // ---- evaluate ----
  std::string eval_pred, eval_gt, eval_report;
  CLI::App* eval = app.add_subcommand("evaluate", "lip-sync metrics over sequence directories");
  eval->add_option("--pred", eval_pred, "predicted sequence directory")->required();
  eval->add_option("--gt", eval_gt, "ground-truth sequence directory")->required();
  eval->add_option("--out", eval_report, "metric report JSON path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      facetalk::data::CorpusConfig ccfg;
      ccfg.clip_seconds = synth_seconds;
      auto corpus = facetalk::data::synth_corpus(synth_seed, synth_ids, synth_clips, ccfg);
      const std::string out = output_override(synth_out);
      facetalk::data::write_corpus(corpus, out, synth_seed, ccfg);
      nlohmann::json j = {{"clips", corpus.size()}, {"dir", out}};
      std::cout << j.dump() << std::endl;
      return 0;
    }
    if (assets->parsed()) {
      facetalk::pipeline::write_assets(assets_out);
      std::cout << nlohmann::json({{"dir", assets_out}}).dump() << std::endl;
      return 0;
    }
    if (train->parsed()) {
      auto cfg = facetalk::pipeline::PipelineConfig::load(train_config);
      auto result =
          facetalk::pipeline::train_stage(train_stage_name, cfg, train_resume, train_max_steps);
      std::cout << nlohmann::json({{"stage", train_stage_name},
                                   {"checkpoint", result.checkpoint_path},
                                   {"steps", result.steps},
                                   {"final_loss", result.final_loss}})
                       .dump()
                << std::endl;
      return 0;
    }
    if (gen->parsed()) {
      auto cfg = facetalk::pipeline::PipelineConfig::load(gen_config);
      const std::string out = output_override(gen_out.empty() ? cfg.output_dir : gen_out);
      auto result = facetalk::pipeline::generate(gen_text, gen_face, gen_landmarks, cfg, out);
      nlohmann::json j = {{"out_dir", result.out_dir},
                          {"frames", result.frame_count},
                          {"duration_s", result.duration_s},
                          {"wav", result.wav_path},
                          {"manifest", result.manifest_path}};
      if (result.no_stop) j["warning"] = "NoStop";
      std::cout << j.dump() << std::endl;
      return 0;
    }
    if (eval->parsed()) {
      auto result = facetalk::pipeline::evaluate(eval_pred, eval_gt, eval_report);
      std::cout << result.report.to_json().dump() << std::endl;
      std::cout << result.report.to_text();
      return 0;
    }
  } catch (const facetalk::Error& e) {
    emit_error(e.code(), e.what());
    return 1;
  } catch (const std::exception& e) {
    emit_error("Internal", e.what());
    return 1;
  }
  return 0;
}
