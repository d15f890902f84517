// uavsense: command-line front end for capture generation, offline
// processing, missions and sweeps.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "uavsense/harness/files.hpp"
#include "uavsense/harness/iq_io.hpp"

namespace fs = std::filesystem;
using namespace uavsense;
using namespace uavsense::harness;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::string format = "csv";
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

fs::path out_path(const Globals& g, const std::string& name) {
  fs::create_directories(g.out_dir);
  return fs::path(g.out_dir) / name;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p, std::ios::trunc);
  if (!os) throw ConfigError("cannot write " + p.string());
  return os;
}

void write_json(const fs::path& p, const json& j) {
  auto os = open_out(p);
  os << j.dump(2) << "\n";
  std::cout << "wrote " << p.string() << "\n";
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string t; std::getline(ss, t, ',');)
    if (!t.empty()) out.push_back(t);
  return out;
}

std::vector<int> split_ints(const std::string& s) {
  std::vector<int> v;
  for (auto& t : split(s)) {
    try {
      std::size_t used = 0;
      v.push_back(std::stoi(t, &used));
      if (used != t.size()) throw std::invalid_argument(t);
    } catch (const std::logic_error&) {
      throw UsageError("expected a comma-separated integer list, got '" + s + "'");
    }
  }
  return v;
}

// A config file that does not match its schema is a usage error.
template <class F>
auto config_file(F&& f) {
  try {
    return f();
  } catch (const FormatError& e) {
    throw UsageError(e.what());
  }
}

// A capture config file, or a bare SRS config.
CompositeSpec load_capture_config(const std::string& path) {
  return config_file([&] {
    json j = read_json_file(path);
    if (j.is_object() && j.contains("kind")) return composite_from_json(j, path);
    CompositeSpec s;
    s.srs = srs_from_json(j, path);
    return s;
  });
}

void write_capture(const Globals& g, const std::string& name, const CompositeSpec& spec) {
  auto cap = build_composite_capture(spec);
  auto p = out_path(g, name);
  write_iq(p.string(), cap);
  std::cout << "wrote " << p.string() << " (" << cap.samples.size() << " samples at " << cap.sample_rate_hz
            << " Hz)\n";
  write_json(out_path(g, name + ".capture.json"), to_json(spec));
}

ScenarioFile load_scenario_arg(const Globals& g, const std::string& preset) {
  if (!g.config.empty() && !preset.empty()) throw UsageError("give either --config or --preset, not both");
  if (!preset.empty()) {
    if (preset == "rural") return preset_file(presets::rural());
    if (preset == "urban") return preset_file(presets::urban());
    throw UsageError("unknown preset '" + preset + "' (rural or urban)");
  }
  if (g.config.empty()) throw UsageError("a scenario is required: --config <file> or --preset rural|urban");
  return config_file([&] { return load_scenario(g.config); });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"uavsense: SRS sensing chain for a non-serving UAV receiver"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "Config file (JSON); meaning depends on the subcommand");
  app.add_option("--seed", g.seed, "Base seed (overrides the config)");
  app.add_option("--out-dir", g.out_dir, "Output directory")->capture_default_str();
  app.add_option("--format", g.format, "Tabular output format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();

  // generate
  auto* gen = app.add_subcommand("generate", "Single-UE SRS frames to an IQ file");
  int gen_shift = 0, gen_periods = 4;
  double gen_power = 0, gen_offset = 0, gen_cfo = 0;
  std::optional<double> gen_snr;
  std::string gen_name = "srs.cf32";
  gen->add_option("--shift", gen_shift, "Cyclic shift index w (0..7)")->capture_default_str();
  gen->add_option("--periods", gen_periods, "SRS periods in the file")->capture_default_str();
  gen->add_option("--power", gen_power, "Power in dBfs")->capture_default_str();
  gen->add_option("--offset", gen_offset, "Arrival offset in samples")->capture_default_str();
  gen->add_option("--cfo", gen_cfo, "CFO in Hz")->capture_default_str();
  gen->add_option("--snr", gen_snr, "SNR in dB (default: noise-free)");
  gen->add_option("--name", gen_name, "Output file name")->capture_default_str();

  // composite
  auto* comp = app.add_subcommand("composite", "Superimposed multi-UE capture, optionally on two bands");
  std::optional<double> comp_snr;
  std::optional<int> comp_periods;
  std::string comp_name = "composite.cf32";
  comp->add_option("--snr", comp_snr, "SNR in dB relative to the strongest UE");
  comp->add_option("--periods", comp_periods, "SRS periods in the file");
  comp->add_option("--name", comp_name, "Output file name")->capture_default_str();

  // process
  auto* proc_cmd = app.add_subcommand("process", "IQ file to detection log");
  std::string proc_input, proc_shifts;
  int proc_band = 0;
  proc_cmd->add_option("capture", proc_input, "Capture file (.cf32 with .json sidecar)")->required();
  proc_cmd->add_option("--band", proc_band, "Band index in the capture config")->capture_default_str();
  proc_cmd->add_option("--shifts", proc_shifts, "Assigned shifts, e.g. 0,4,2 (default: from --config)");

  // mission
  auto* mis = app.add_subcommand("mission", "Simulated flight: perimeter, hexagons, estimates");
  std::string mis_preset;
  bool mis_no_log = false;
  mis->add_option("--preset", mis_preset, "Built-in scenario: rural or urban");
  mis->add_flag("--no-log", mis_no_log, "Leave the measurement log out of the report");

  // sweep
  auto* sw = app.add_subcommand("sweep", "Misidentification grid or localization CDF");
  std::string sw_kind, sw_ub, sw_bw, sw_preset;
  std::optional<int> sw_trials;
  int sw_seeds = 50, sw_threads = 0;
  sw->add_option("--kind", sw_kind, "misid or loc")->required()->check(CLI::IsMember({"misid", "loc"}));
  sw->add_option("--ub", sw_ub, "UEs per band, e.g. 2,4,8 (misid)");
  sw->add_option("--bandwidth", sw_bw, "1.4MHz and/or 13MHz, comma-separated (misid)");
  sw->add_option("--trials", sw_trials, "Trials per cell (misid)");
  sw->add_option("--seeds", sw_seeds, "Missions per scenario (loc)")->capture_default_str();
  sw->add_option("--preset", sw_preset, "Built-in scenario for loc: rural or urban");
  sw->add_option("--threads", sw_threads, "Worker threads, 0 = all cores")->capture_default_str();

  // report
  auto* rep = app.add_subcommand("report", "Tables and CDF CSV from result files");
  std::vector<std::string> rep_inputs;
  rep->add_option("results", rep_inputs, "Result JSON files (mission_report, loc_cdf, misid_grid)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    if (rc == 0) return 0;
    std::cerr << "\n" << scenario_schema_help();
    return 2;
  }

  try {
    const bool csv = g.format == "csv";
    if (*gen) {
      CompositeSpec s;
      if (!g.config.empty()) s.srs = load_capture_config(g.config).srs;
      s.ues = {{1, gen_shift, gen_power, gen_offset, gen_cfo}};
      s.n_periods = gen_periods;
      s.snr_db = gen_snr;
      s.seed = g.seed.value_or(1);
      write_capture(g, gen_name, s);
    } else if (*comp) {
      CompositeSpec s = g.config.empty() ? CompositeSpec::lab() : load_capture_config(g.config);
      if (s.ues.empty()) throw ConfigError("capture config has no UEs");
      if (comp_snr) s.snr_db = comp_snr;
      if (comp_periods) s.n_periods = *comp_periods;
      if (g.seed) s.seed = *g.seed;
      write_capture(g, comp_name, s);
    } else if (*proc_cmd) {
      if (g.config.empty()) throw UsageError("process needs --config <capture or SRS config>");
      CompositeSpec s = load_capture_config(g.config);
      std::vector<ident::BandUe> ues;
      waveform::SrsConfig srs = s.srs;
      if (!proc_shifts.empty()) {
        int id = 1;
        for (int w : split_ints(proc_shifts)) ues.push_back({id++, w});
        if (proc_band != 0) throw UsageError("--band needs a capture config listing the bands");
      } else {
        if (s.ues.empty()) throw UsageError("no UEs in the config; pass --shifts");
        auto bands = composite_bands(s);
        if (proc_band < 0 || proc_band >= static_cast<int>(bands.size()))
          throw UsageError("--band out of range for this capture config");
        srs = bands[proc_band].srs;
        ues = bands[proc_band].ues;
      }
      auto cap = read_iq(proc_input);
      auto res = process_capture(cap, srs, ues, {}, proc_band);
      if (csv) {
        auto p = out_path(g, "detections.csv");
        auto os = open_out(p);
        write_detections_csv(os, res.rows);
        std::cout << "wrote " << p.string() << "\n";
      } else {
        write_json(out_path(g, "detections.json"), detections_json(res.rows));
      }
      std::cout << res.receptions.size() << " receptions, " << res.acquisitions << " acquisitions, "
                << res.false_positives << " false positives\n";
    } else if (*mis) {
      ScenarioFile f = load_scenario_arg(g, mis_preset);
      if (g.seed) f.seed = *g.seed;
      auto r = mission::run_mission(f.scenario, f.plan, f.seed, f.processing);
      write_json(out_path(g, "mission_report.json"), mission_report_json(r, f, !mis_no_log));
      {
        auto p = out_path(g, "estimates.jsonl");
        auto os = open_out(p);
        write_estimates_jsonl(os, r);
        std::cout << "wrote " << p.string() << "\n";
      }
      if (csv) {
        auto p = out_path(g, "le_table.csv");
        auto os = open_out(p);
        write_le_table_csv(os, r);
        auto q = out_path(g, "detections.csv");
        auto od = open_out(q);
        write_detections_csv(od, r.detections);
        std::cout << "wrote " << p.string() << "\nwrote " << q.string() << "\n";
      } else {
        write_json(out_path(g, "detections.json"), detections_json(r.detections));
      }
      write_le_table_csv(std::cout, r);
      std::cout << "ALE initial " << num(r.ale_initial) << " m, refined " << num(r.ale_refined) << " m\n";
    } else if (*sw) {
      if (sw_kind == "misid") {
        MisidSpec s = g.config.empty() ? MisidSpec{}
                                       : config_file([&] { return misid_spec_from_json(read_json_file(g.config), g.config); });
        if (!sw_ub.empty()) s.ub = split_ints(sw_ub);
        if (!sw_bw.empty()) {
          s.bandwidths.clear();
          for (auto& b : split(sw_bw)) s.bandwidths.push_back(bandwidth_by_name(b));
        }
        if (sw_trials) s.trials = *sw_trials;
        if (g.seed) s.seed = *g.seed;
        s.threads = sw_threads;
        auto grid = run_misid_grid(s);
        if (csv) {
          for (int ub : s.ub) {
            auto p = out_path(g, "misid_grid_ub" + std::to_string(ub) + ".csv");
            auto os = open_out(p);
            write_grid_csv(os, grid, ub);
            std::cout << "wrote " << p.string() << "\n";
          }
        } else {
          write_json(out_path(g, "misid_grid.json"), grid_json(grid, s));
        }
      } else {
        LocCdfSpec s;
        s.scenario = load_scenario_arg(g, sw_preset);
        s.first_seed = g.seed.value_or(s.scenario.seed);
        s.n_seeds = sw_seeds;
        s.threads = sw_threads;
        auto c = run_loc_cdf(s);
        if (csv) {
          auto p = out_path(g, "loc_cdf_" + c.scenario + ".csv");
          auto os = open_out(p);
          write_cdf_csv(os, c);
          auto q = out_path(g, "loc_table_" + c.scenario + ".csv");
          auto ot = open_out(q);
          write_ue_table_csv(ot, c);
          std::cout << "wrote " << p.string() << "\nwrote " << q.string() << "\n";
        } else {
          write_json(out_path(g, "loc_cdf_" + c.scenario + ".json"), loc_cdf_json(c));
        }
        std::cout << "ALE initial " << num(c.ale_initial) << " m, refined " << num(c.ale_refined) << " m\n";
      }
    } else if (*rep) {
      for (const auto& in : rep_inputs) {
        json j = read_json_file(in);
        const std::string kind = j.is_object() ? j.value("kind", std::string{}) : "";
        const std::string stem = fs::path(in).stem().string();
        if (kind == "loc_cdf") {
          auto c = loc_cdf_from_json(j, in);
          auto p = out_path(g, stem + "_cdf.csv");
          auto os = open_out(p);
          write_cdf_csv(os, c);
          auto q = out_path(g, stem + "_table.csv");
          auto ot = open_out(q);
          write_ue_table_csv(ot, c);
          std::cout << "wrote " << p.string() << "\nwrote " << q.string() << "\n";
        } else if (kind == "misid_grid") {
          auto grid = grid_from_json(j, in);
          auto p = out_path(g, stem + ".csv");
          auto os = open_out(p);
          write_grid_csv(os, grid);
          std::cout << "wrote " << p.string() << "\n";
        } else if (kind == "mission_report") {
          expect_kind(j, "mission_report", in);
          auto p = out_path(g, stem + "_table.csv");
          auto os = open_out(p);
          os << "ue,band,shift,los,n_records,flight_min_initial,flight_min_refined,le_m_initial,le_m_refined\n";
          for (const auto& row : j.at("table")) {
            auto f = [&](const char* k) { return row.at(k).is_null() ? std::string{} : num(row.at(k).get<double>()); };
            os << row.at("ue").get<int>() << "," << row.at("band").get<int>() << "," << row.at("shift").get<int>()
               << "," << (row.at("los").get<bool>() ? 1 : 0) << "," << row.at("n_records").get<int>() << ","
               << f("flight_min_initial") << "," << f("flight_min_refined") << "," << f("le_m_initial") << ","
               << f("le_m_refined") << "\n";
          }
          std::cout << "wrote " << p.string() << "\n";
        } else {
          throw FormatError(in + ": not a result file (kind mission_report, loc_cdf or misid_grid)");
        }
      }
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n\n" << app.help() << "\n" << scenario_schema_help();
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
