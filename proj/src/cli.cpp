// Copyright 2026 The relquant Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "relquant/cli.hpp"

#include <bit>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "relquant/adversary.hpp"
#include "relquant/errors.hpp"
#include "relquant/generators.hpp"
#include "relquant/measure.hpp"
#include "relquant/rank_oracle.hpp"
#include "relquant/relative_sketch.hpp"

namespace relquant {

namespace {

using nlohmann::json;

uint64_t env_thread_cap() {
  const char* v = std::getenv("RELQUANT_THREADS");
  if (v == nullptr) return 0;
  char* end = nullptr;
  unsigned long n = std::strtoul(v, &end, 10);
  if (end == v || n == 0) return 1;
  return n;
}

struct grid_spec {
  enum class kind { log_ranks, ranks, keys } k = kind::log_ranks;
  std::vector<uint64_t> ranks;
  std::vector<rational> keys;
};

grid_spec parse_grid(const std::string& s) {
  grid_spec g;
  if (s.empty() || s == "log") return g;
  auto split = [](const std::string& body) {
    std::vector<std::string> parts;
    std::stringstream ss(body);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty()) parts.push_back(tok);
    return parts;
  };
  if (s.rfind("ranks:", 0) == 0) {
    g.k = grid_spec::kind::ranks;
    for (const auto& t : split(s.substr(6)))
      g.ranks.push_back(std::stoull(t));
    return g;
  }
  if (s.rfind("keys:", 0) == 0) {
    g.k = grid_spec::kind::keys;
    for (const auto& t : split(s.substr(5))) g.keys.push_back(parse_rational(t));
    return g;
  }
  throw std::invalid_argument("grid must be log, ranks:..., or keys:...");
}

struct sketch_cfg {
  uint32_t eps_exp = 6;
  bool high_prob = false;
  uint32_t delta_log = 8;
  uint64_t seed = 1;

  sketch_params params() const {
    return high_prob ? sketch_params::make(eps_exp, true, delta_log)
                     : sketch_params::make(eps_exp);
  }
};

void add_sketch_flags(CLI::App* cmd, std::string& eps, std::string& mode,
                      std::string& delta, uint64_t& seed) {
  cmd->add_option("--eps", eps, "accuracy, written 1/64 or 1/2^6");
  cmd->add_option("--mode", mode, "const or highprob")
      ->check(CLI::IsMember({"const", "highprob"}));
  cmd->add_option("--delta", delta, "failure bound in highprob mode, e.g. 1/256");
  cmd->add_option("--seed", seed, "PRNG seed");
}

sketch_cfg resolve_sketch_cfg(const std::string& eps, const std::string& mode,
                              const std::string& delta, uint64_t seed) {
  sketch_cfg c;
  c.eps_exp = parse_inverse_pow2(eps);
  c.seed = seed;
  if (mode == "highprob") {
    c.high_prob = true;
    c.delta_log = parse_inverse_pow2(delta);
    if (c.delta_log < 1)
      throw std::invalid_argument("delta must be at most 1/2");
  }
  return c;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json report_to_json(const error_report& rep) {
  json q = json::array();
  for (const auto& r : rep.queries) {
    q.push_back({{"query_rank", r.query_rank},
                 {"true_rank", r.true_rank},
                 {"mean_rel_err", r.mean_rel_err},
                 {"rms_rel_err", r.rms_rel_err},
                 {"p90_rel_err", r.p90_rel_err},
                 {"peak_space", r.peak_space}});
  }
  return json{{"peak_space", rep.peak_space},
              {"mean_space", rep.mean_space},
              {"queries", q}};
}

int cmd_gen(const std::string& kind, uint64_t n, uint64_t seed, uint64_t batch,
            uint64_t pauses, const std::string& out_path, std::ostream& out,
            std::ostream& err) {
  std::vector<rational> keys;
  try {
    keys = gen_stream(kind, n, seed, {batch, pauses});
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return exit_config;
  }
  if (out_path.empty()) {
    write_stream(out, keys);
    return exit_ok;
  }
  std::ofstream f(out_path);
  if (!f) {
    err << "error: cannot open " << out_path << '\n';
    return exit_io;
  }
  write_stream(f, keys);
  if (!f.good()) {
    err << "error: write failed on " << out_path << '\n';
    return exit_io;
  }
  return exit_ok;
}

int cmd_run(const sketch_cfg& cfg, const std::string& in_path,
            const grid_spec& grid, bool trace, const std::string& format,
            const std::string& out_path, std::ostream& out, std::ostream& err) {
  std::vector<rational> stream;
  try {
    if (in_path.empty()) {
      stream = read_stream(std::cin);
    } else {
      std::ifstream f(in_path);
      if (!f) {
        err << "error: cannot open " << in_path << '\n';
        return exit_io;
      }
      stream = read_stream(f);
    }
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return exit_config;
  }

  sketch_options opt;
  opt.trace = trace;
  relative_sketch<rational> sk(cfg.params(), cfg.seed, opt);
  try {
    for (const auto& x : stream) sk.insert(x);
  } catch (const capacity_exhausted& e) {
    err << "error: " << e.what() << '\n';
    return exit_capacity;
  }

  std::vector<rational> keys;
  std::vector<std::optional<uint64_t>> grid_ranks;
  if (grid.k == grid_spec::kind::keys) {
    keys = grid.keys;
    grid_ranks.assign(keys.size(), std::nullopt);
  } else {
    rank_oracle<rational> oracle(stream);
    std::vector<uint64_t> ranks = grid.k == grid_spec::kind::ranks
                                      ? grid.ranks
                                      : log_rank_grid(stream.size());
    for (uint64_t r : ranks) {
      if (r >= oracle.size()) continue;
      keys.push_back(oracle.key_at_rank(r));
      grid_ranks.push_back(r);
    }
  }

  std::ostringstream body;
  if (format == "csv") {
    body << "key,estimate\n";
    for (size_t i = 0; i < keys.size(); ++i)
      body << keys[i].str() << ',' << format_double(sk.query(keys[i])) << '\n';
  } else {
    json j;
    j["config"] = {{"eps", std::string("1/") +
                               std::to_string(uint64_t{1} << cfg.eps_exp)},
                   {"mode", cfg.high_prob ? "highprob" : "const"},
                   {"seed", cfg.seed},
                   {"n", stream.size()}};
    json est = json::array();
    for (size_t i = 0; i < keys.size(); ++i) {
      json e{{"key", keys[i].str()}, {"estimate", sk.query(keys[i])}};
      if (grid_ranks[i]) e["rank"] = *grid_ranks[i];
      est.push_back(e);
    }
    j["estimates"] = est;
    body << j.dump(2) << '\n';
  }

  if (out_path.empty()) {
    out << body.str();
  } else {
    std::ofstream f(out_path);
    if (!f) {
      err << "error: cannot open " << out_path << '\n';
      return exit_io;
    }
    f << body.str();
    if (!f.good()) return exit_io;
  }
  if (trace) {
    std::string tpath =
        out_path.empty() ? std::string("trace.csv") : out_path + ".trace.csv";
    std::ofstream f(tpath);
    if (!f) {
      err << "error: cannot open " << tpath << '\n';
      return exit_io;
    }
    sk.write_trace_csv(f);
    if (!f.good()) return exit_io;
  }
  return exit_ok;
}

int cmd_bench(const std::vector<std::string>& gens,
              const std::vector<std::string>& eps_list, uint64_t n,
              uint64_t seeds, uint64_t seed0, const std::string& format,
              const std::string& out_path, std::ostream& out,
              std::ostream& err) {
  unsigned threads = static_cast<unsigned>(env_thread_cap());
  json cells = json::array();
  std::ostringstream csv;
  csv << "gen,eps,rank,true_rank,mean_rel_err,rms_rel_err,p90_rel_err,"
         "peak_space,space_bound,space_ok\n";
  for (const auto& g : gens) {
    for (const auto& es : eps_list) {
      uint32_t m = parse_inverse_pow2(es);
      std::vector<rational> stream;
      try {
        stream = gen_stream(g, n, seed0);
      } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return exit_config;
      }
      std::vector<uint64_t> seed_list;
      for (uint64_t t = 0; t < seeds; ++t) seed_list.push_back(seed0 + t);
      auto factory = [m](uint64_t s) {
        return relative_sketch<rational>(sketch_params::make(m), s);
      };
      error_report rep;
      try {
        rep = measure_error(factory, stream, log_rank_grid(stream.size()),
                            seed_list, threads);
      } catch (const capacity_exhausted& e) {
        err << "error: " << e.what() << '\n';
        return exit_capacity;
      }
      // space budget: 64/eps * log2(eps n) * (log2(1/eps)+log2 log2 n) * log2(1/eps)
      double eps = std::ldexp(1.0, -static_cast<int>(m));
      double lg_en = std::log2(std::max(2.0, eps * static_cast<double>(n)));
      double lglg_n = std::log2(std::max(2.0, std::log2(double(n))));
      double bound = 64.0 / eps * lg_en * (m + lglg_n) * std::max<double>(m, 1);
      bool ok = static_cast<double>(rep.peak_space) <= bound;
      json cell = {{"gen", g},
                   {"eps", es},
                   {"n", n},
                   {"seeds", seeds},
                   {"space_bound", bound},
                   {"space_ok", ok},
                   {"report", report_to_json(rep)}};
      cells.push_back(cell);
      for (const auto& qr : rep.queries) {
        csv << g << ',' << es << ',' << qr.query_rank << ',' << qr.true_rank
            << ',' << format_double(qr.mean_rel_err) << ','
            << format_double(qr.rms_rel_err) << ','
            << format_double(qr.p90_rel_err) << ',' << qr.peak_space << ','
            << format_double(bound) << ',' << (ok ? 1 : 0) << '\n';
      }
    }
  }
  std::string body = format == "csv" ? csv.str() : json{{"cells", cells}}.dump(2) + "\n";
  if (out_path.empty()) {
    out << body;
    return exit_ok;
  }
  std::ofstream f(out_path);
  if (!f) {
    err << "error: cannot open " << out_path << '\n';
    return exit_io;
  }
  f << body;
  return f.good() ? exit_ok : exit_io;
}

int cmd_adversary(uint32_t depth, uint32_t trials, uint64_t keep,
                  uint64_t seed, const std::string& out_path, std::ostream& out,
                  std::ostream& err) {
  adversary_transcript tr;
  try {
    auto factory = [keep](uint64_t s) { return keep_smallest(keep, s); };
    tr = build_adversary_stream(depth, factory, trials, seed);
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return exit_config;
  }
  json j;
  j["depth"] = tr.depth;
  j["trials"] = tr.trials;
  j["stream_len"] = tr.stream.size();
  j["query"] = tr.query.str();
  j["query_index"] = tr.query_index;
  j["query_rank"] = tr.query_rank;
  j["remember_probs"] = tr.remember_probs;
  j["ambiguous"] = tr.ambiguous;
  j["case_one"] = tr.case_one;
  j["max_mean_space"] = tr.max_mean_space;
  j["mean_sq_err"] = tr.mean_sq_err;
  j["score"] = tr.max_mean_space + tr.mean_sq_err;
  if (out_path.empty()) {
    out << j.dump(2) << '\n';
    return exit_ok;
  }
  std::ofstream f(out_path);
  if (!f) {
    err << "error: cannot open " << out_path << '\n';
    return exit_io;
  }
  f << j.dump(2) << '\n';
  return f.good() ? exit_ok : exit_io;
}

}  // namespace

uint32_t parse_inverse_pow2(const std::string& s) {
  if (s.rfind("1/", 0) != 0)
    throw std::invalid_argument("expected 1/<power of two>: " + s);
  std::string body = s.substr(2);
  uint64_t denom;
  if (body.rfind("2^", 0) == 0) {
    size_t pos = 0;
    unsigned long e = std::stoul(body.substr(2), &pos);
    if (pos != body.size() - 2 || e > 30)
      throw std::invalid_argument("bad exponent in " + s);
    return static_cast<uint32_t>(e);
  }
  size_t pos = 0;
  denom = std::stoull(body, &pos);
  if (pos != body.size() || denom == 0 || (denom & (denom - 1)) != 0)
    throw std::invalid_argument("denominator must be a power of two: " + s);
  return static_cast<uint32_t>(std::countr_zero(denom));
}

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"relative-error streaming quantile sketch"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "generate a stream file");
  std::string g_kind = "uniform", g_out;
  uint64_t g_n = 1000, g_seed = 1, g_batch = 0, g_pauses = 100;
  gen->add_option("--gen", g_kind,
                  "uniform|sorted|reverse|permutation|tree_instance");
  gen->add_option("--n", g_n, "stream length");
  gen->add_option("--seed", g_seed, "generator seed");
  gen->add_option("--batch", g_batch, "tree_instance batch size (0: n^0.1)");
  gen->add_option("--pauses", g_pauses, "tree_instance pauses per batch");
  gen->add_option("--out", g_out, "output path (default stdout)");

  // run
  auto* run = app.add_subcommand("run", "ingest a stream and answer queries");
  std::string r_eps = "1/64", r_mode = "const", r_delta = "1/256";
  uint64_t r_seed = 1;
  std::string r_in, r_grid = "log", r_format = "json", r_out;
  bool r_trace = false;
  add_sketch_flags(run, r_eps, r_mode, r_delta, r_seed);
  run->add_option("--in", r_in, "stream file (default stdin)");
  run->add_option("--grid", r_grid, "log | ranks:r1,r2,... | keys:k1,k2,...");
  run->add_flag("--trace", r_trace, "write the allocator trace CSV");
  run->add_option("--format", r_format, "json or csv")
      ->check(CLI::IsMember({"json", "csv"}));
  run->add_option("--out", r_out, "report path (default stdout)");

  // bench
  auto* bench = app.add_subcommand("bench", "error/space matrix");
  std::string b_gens = "uniform", b_eps = "1/16", b_format = "json", b_out;
  uint64_t b_n = 100000, b_seeds = 30, b_seed = 1;
  bench->add_option("--gens", b_gens, "comma-separated generators");
  bench->add_option("--eps-list", b_eps, "comma-separated eps values");
  bench->add_option("--n", b_n, "stream length");
  bench->add_option("--seeds", b_seeds, "trials per cell");
  bench->add_option("--seed", b_seed, "base seed");
  bench->add_option("--format", b_format, "json or csv")
      ->check(CLI::IsMember({"json", "csv"}));
  bench->add_option("--out", b_out, "report path (default stdout)");

  // adversary
  auto* adv = app.add_subcommand("adversary", "adaptive hard-stream harness");
  uint64_t a_depth = 8, a_trials = 200, a_keep = 2, a_seed = 1;
  std::string a_out;
  adv->add_option("--depth", a_depth, "recursion depth k (stream 2^k - 1)");
  adv->add_option("--trials", a_trials, "trials per probability estimate");
  adv->add_option("--keep", a_keep, "baseline keeps this many smallest keys");
  adv->add_option("--seed", a_seed, "seed");
  adv->add_option("--out", a_out, "transcript path (default stdout)");

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return exit_ok;
    }
    err << "error: " << e.what() << '\n';
    return exit_config;
  }

  try {
    if (gen->parsed())
      return cmd_gen(g_kind, g_n, g_seed, g_batch, g_pauses, g_out, out, err);
    if (run->parsed()) {
      sketch_cfg cfg = resolve_sketch_cfg(r_eps, r_mode, r_delta, r_seed);
      return cmd_run(cfg, r_in, parse_grid(r_grid), r_trace, r_format, r_out,
                     out, err);
    }
    if (bench->parsed()) {
      auto split = [](const std::string& s) {
        std::vector<std::string> parts;
        std::stringstream ss(s);
        std::string tok;
        while (std::getline(ss, tok, ','))
          if (!tok.empty()) parts.push_back(tok);
        return parts;
      };
      return cmd_bench(split(b_gens), split(b_eps), b_n, b_seeds, b_seed,
                       b_format, b_out, out, err);
    }
    if (adv->parsed())
      return cmd_adversary(static_cast<uint32_t>(a_depth),
                           static_cast<uint32_t>(a_trials), a_keep, a_seed,
                           a_out, out, err);
  } catch (const capacity_exhausted& e) {
    err << "error: " << e.what() << '\n';
    return exit_capacity;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return exit_config;
  } catch (const std::ios_base::failure& e) {
    err << "error: " << e.what() << '\n';
    return exit_io;
  }
  err << "error: no subcommand\n";
  return exit_config;
}

}  // namespace relquant
