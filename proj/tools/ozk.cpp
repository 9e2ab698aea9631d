// ozk: run, translate and explore kernel programs.
//
// exit status: 0 done, 1 failed, 2 deadlock, 3 usage or parse error

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "ozk/dist.hpp"
#include "ozk/prolog.hpp"
#include "ozk/runtime.hpp"
#include "ozk/syntax.hpp"

namespace {

constexpr int kDone = 0, kFailed = 1, kDeadlock = 2, kUsage = 3;

struct Config {
  std::string file;
  std::string query;
  bool all = false;
  std::string policy = "fifo";
  std::uint64_t sched_seed = 0;
  std::uint64_t net_seed = 0;
  std::uint64_t max_steps = 100'000'000;
  std::string trace;
  bool real_time = false;
  bool bagof_generators = false;
  bool no_prelude = false;
  std::string placement;
  bool shuffle = false;
};

ozk::RuntimeOptions runtime_options(const Config& c) {
  ozk::RuntimeOptions o;
  o.policy = c.policy == "random" ? ozk::SchedPolicy::Random : ozk::SchedPolicy::Fifo;
  o.seed = c.sched_seed;
  o.max_steps = c.max_steps;
  o.trace = c.trace == "sched" || c.trace == "all";
  o.real_time = c.real_time;
  o.prelude = !c.no_prelude;
  return o;
}

bool read_file(const std::string& path, std::string& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::stringstream ss;
  ss << in.rdbuf();
  out = ss.str();
  return true;
}

bool is_prolog(const std::string& path) { return path.size() > 3 && path.compare(path.size() - 3, 3, ".pl") == 0; }

// Source line of a position, for diagnostics.
std::string source_line(const std::string& text, int line) {
  std::istringstream in(text);
  std::string l;
  for (int i = 1; std::getline(in, l); ++i)
    if (i == line) return l;
  return {};
}

int report_prolog_error(const ozk::prolog::PrologError& e, const std::string& text) {
  std::cerr << e.what() << "\n";
  std::string l = source_line(text, e.pos().line);
  if (!l.empty()) std::cerr << "  " << l << "\n";
  return kUsage;
}

int finish(ozk::Runtime& rt, ozk::Outcome o, const Config& c) {
  for (auto& line : rt.output()) std::cout << line << "\n";
  std::cout.flush();
  if (!c.trace.empty())
    for (auto& t : rt.trace()) std::cerr << t << "\n";
  switch (o) {
    case ozk::Outcome::AllDone:
      return kDone;
    case ozk::Outcome::Deadlock:
      std::cerr << "deadlock:\n" << rt.deadlock_report();
      return kDeadlock;
    case ozk::Outcome::Failed:
      std::cerr << "failed: " << rt.failure() << "\n";
      return kFailed;
    case ozk::Outcome::StepLimit:
      std::cerr << "step limit of " << c.max_steps << " reached\n";
      return kFailed;
  }
  return kFailed;
}

// Kernel source for a Prolog file and query.
std::string prolog_program(const std::string& text, const Config& c) {
  namespace pl = ozk::prolog;
  pl::Options opts;
  opts.bagof_generators = c.bagof_generators;
  pl::Translation tr = pl::translate(pl::parse(text), opts);
  std::string out = ozk::print_program(tr.program);
  if (!c.query.empty())
    out += "\n" + ozk::print_phrase(*pl::translate_query(pl::parse_query(c.query), tr, c.all, opts)) + "\n";
  return out;
}

int cmd_run(const Config& c) {
  std::string text;
  if (!read_file(c.file, text)) {
    std::cerr << "cannot read " << c.file << "\n";
    return kUsage;
  }
  std::string source = text;
  if (is_prolog(c.file)) {
    if (c.query.empty()) {
      std::cerr << "running a Prolog file needs --query\n";
      return kUsage;
    }
    try {
      source = prolog_program(text, c);
    } catch (const ozk::prolog::PrologError& e) {
      return report_prolog_error(e, text);
    }
  } else if (!c.query.empty()) {
    std::cerr << "--query applies to Prolog files only\n";
    return kUsage;
  }
  try {
    ozk::Runtime rt(runtime_options(c));
    rt.load(source);
    return finish(rt, rt.run(), c);
  } catch (const ozk::SyntaxError& e) {
    std::cerr << c.file << ":" << e.what() << "\n";
  } catch (const ozk::CompileError& e) {
    std::cerr << c.file << ":" << e.what() << "\n";
  }
  return kUsage;
}

int cmd_translate(const Config& c) {
  std::string text;
  if (!read_file(c.file, text)) {
    std::cerr << "cannot read " << c.file << "\n";
    return kUsage;
  }
  namespace pl = ozk::prolog;
  pl::Options opts;
  opts.bagof_generators = c.bagof_generators;
  std::string out;
  try {
    out = pl::translate_source(text, opts);
  } catch (const pl::PrologError& e) {
    return report_prolog_error(e, text);
  }
  // The output must read back as the same program.
  try {
    auto again = ozk::parse_program(out);
    auto orig = pl::translate(pl::parse(text), opts);
    if (!ozk::same_structure(again, orig.program)) {
      std::cerr << "internal error: translation does not read back as the same program\n";
      return kFailed;
    }
  } catch (const ozk::SyntaxError& e) {
    std::cerr << "internal error: translation does not parse: " << e.what() << "\n";
    return kFailed;
  }
  std::cout << out;
  return kDone;
}

int cmd_dist(const Config& c) {
  std::string text;
  if (!read_file(c.file, text)) {
    std::cerr << "cannot read " << c.file << "\n";
    return kUsage;
  }
  namespace d = ozk::dist;
  try {
    d::SimOptions so;
    so.runtime = runtime_options(c);
    so.max_steps = c.max_steps;
    so.net_seed = c.net_seed;
    so.delivery = c.shuffle || c.net_seed != 0 ? d::Delivery::SeededShuffle : d::Delivery::FifoPerLink;
    d::Simulation sim(so);
    sim.load(text, d::parse_placement(c.placement));
    d::SimReport r = sim.run();
    for (auto& line : r.all_outputs()) std::cout << line << "\n";
    std::istringstream summary(r.summary());
    for (std::string line; std::getline(summary, line);) std::cout << "% " << line << "\n";
    if (c.trace == "net" || c.trace == "all")
      for (auto& t : r.trace) std::cout << t << "\n";
    switch (r.outcome) {
      case ozk::Outcome::AllDone:
        return kDone;
      case ozk::Outcome::Deadlock:
        return kDeadlock;
      default:
        return kFailed;
    }
  } catch (const d::DistError& e) {
    std::cerr << e.what() << "\n";
  } catch (const ozk::SyntaxError& e) {
    std::cerr << c.file << ":" << e.what() << "\n";
  } catch (const ozk::CompileError& e) {
    std::cerr << c.file << ":" << e.what() << "\n";
  }
  return kUsage;
}

// Top level. Each input runs in a fresh thread of one session runtime.
int cmd_repl(const Config& c) {
  ozk::Runtime rt(runtime_options(c));
  std::size_t shown = 0;
  int cursor = 0;  // current lazy solution stream, ReplCursorN
  auto run_input = [&](const std::string& src) {
    try {
      rt.load(src);
    } catch (const std::exception& e) {
      std::cout << e.what() << "\n";
      return;
    }
    ozk::Outcome o = rt.run();
    auto lines = rt.output_lines();
    for (; shown < lines.size(); ++shown) std::cout << lines[shown].text << "\n";
    if (o == ozk::Outcome::Failed) std::cout << "failed: " << rt.failure() << "\n";
    if (o == ozk::Outcome::StepLimit) std::cout << "step limit reached\n";
  };
  std::string pending;
  std::string line;
  while (std::getline(std::cin, line)) {
    if (pending.empty() && line.rfind(":solve", 0) == 0) {
      ++cursor;
      std::string cur = "ReplCursor" + std::to_string(cursor);
      run_input("declare " + cur + " in {Solve fun {$} " + line.substr(6) + " end " + cur + "}");
      continue;
    }
    if (pending.empty() && line.rfind(":next", 0) == 0) {
      if (cursor == 0) {
        std::cout << "no solution stream, use :solve first\n";
        continue;
      }
      std::string cur = "ReplCursor" + std::to_string(cursor);
      ozk::Ref r = rt.global(cur);
      if (r != ozk::kNoRef && rt.store().is_atom(rt.store().deref(r), ozk::atoms::nil())) {
        std::cout << "no more solutions\n";
        continue;
      }
      ++cursor;
      std::string next = "ReplCursor" + std::to_string(cursor);
      run_input("declare " + next + " in case " + cur + " of S|Sr then {Browse S} " + next + "=Sr else " + next +
                "=nil end");
      ozk::Ref n = rt.global(next);
      if (n != ozk::kNoRef && rt.store().is_atom(rt.store().deref(n), ozk::atoms::nil()))
        std::cout << "no more solutions\n";
      continue;
    }
    if (pending.empty() && (line == ":quit" || line == ":q")) break;
    pending += line + "\n";
    bool complete = true;
    try {
      ozk::parse_program(pending);
    } catch (const ozk::SyntaxError& e) {
      // keep reading while the input is merely unfinished
      complete = line.empty() || std::string(e.what()).find("end of input") == std::string::npos;
    }
    if (!complete) continue;
    std::string src;
    src.swap(pending);
    run_input(src);
  }
  if (!pending.empty()) run_input(pending);
  return kDone;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernel language interpreter with search, dataflow threads and a Prolog front end"};
  app.require_subcommand(1);
  Config c;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--sched-policy", c.policy, "fifo or random")->check(CLI::IsMember({"fifo", "random"}));
    sub->add_option("--sched-seed", c.sched_seed, "seed of the random scheduler");
    sub->add_option("--max-steps", c.max_steps, "reduction budget");
    sub->add_option("--trace", c.trace, "sched, net or all")->check(CLI::IsMember({"sched", "net", "all"}));
    sub->add_flag("--real-time", c.real_time, "Delay sleeps for real");
    sub->add_flag("--no-prelude", c.no_prelude, "do not load Map, Filter, ...");
  };

  auto* run = app.add_subcommand("run", "run a kernel (.ozk) or Prolog (.pl) file");
  run->add_option("file", c.file)->required();
  run->add_option("--query", c.query, "Prolog query, e.g. 'queens(8, Qs)'");
  run->add_flag("--all", c.all, "all solutions of the query");
  run->add_flag("--bagof-generators", c.bagof_generators, "search over free bagof variables");
  common(run);

  auto* repl = app.add_subcommand("repl", "read statements from standard input");
  common(repl);

  auto* tr = app.add_subcommand("translate", "print the kernel translation of a Prolog file");
  tr->add_option("file", c.file)->required();
  tr->add_flag("--bagof-generators", c.bagof_generators, "search over free bagof variables");

  auto* dr = app.add_subcommand("dist-run", "run a kernel file on simulated nodes");
  dr->add_option("file", c.file)->required();
  dr->add_option("--placement", c.placement, "top-level thread to node, e.g. 1=0,2=1,main=0");
  dr->add_option("--net-seed", c.net_seed, "seed of the shuffling network (0: FIFO per link)");
  dr->add_flag("--shuffle", c.shuffle, "shuffled delivery even with seed 0");
  common(dr);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }
  if (*run) return cmd_run(c);
  if (*repl) return cmd_repl(c);
  if (*tr) return cmd_translate(c);
  if (*dr) return cmd_dist(c);
  return kUsage;
}
