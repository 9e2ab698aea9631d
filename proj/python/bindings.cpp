// Python bindings: run kernel programs, translate Prolog, simulate nodes.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ozk/dist.hpp"
#include "ozk/prolog.hpp"
#include "ozk/runtime.hpp"
#include "ozk/syntax.hpp"

namespace py = pybind11;

namespace {

ozk::RuntimeOptions options(const std::string& policy, std::uint64_t seed, std::uint64_t max_steps, bool prelude) {
  ozk::RuntimeOptions o;
  if (policy == "random")
    o.policy = ozk::SchedPolicy::Random;
  else if (policy != "fifo")
    throw py::value_error("policy must be 'fifo' or 'random'");
  o.seed = seed;
  o.max_steps = max_steps;
  o.prelude = prelude;
  return o;
}

py::dict result(ozk::Outcome o, const std::vector<std::string>& out, std::int64_t clock, const std::string& failure) {
  py::dict d;
  d["outcome"] = ozk::outcome_name(o);
  d["output"] = out;
  d["clock"] = clock;
  d["failure"] = failure;
  return d;
}

py::dict run(const std::string& source, const std::string& policy, std::uint64_t seed, std::uint64_t max_steps,
             bool prelude) {
  ozk::Runtime rt(options(policy, seed, max_steps, prelude));
  rt.load(source);
  ozk::Outcome o = rt.run();
  return result(o, rt.output(), rt.clock(), rt.failure());
}

std::string prolog_source(const std::string& text, const std::string& query, bool all, bool generators) {
  namespace pl = ozk::prolog;
  pl::Options opts;
  opts.bagof_generators = generators;
  auto tr = pl::translate(pl::parse(text), opts);
  return ozk::print_program(tr.program) + "\n" +
         ozk::print_phrase(*pl::translate_query(pl::parse_query(query), tr, all, opts)) + "\n";
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "kernel language interpreter";

  py::register_exception<ozk::SyntaxError>(m, "SyntaxError", PyExc_ValueError);
  py::register_exception<ozk::CompileError>(m, "CompileError", PyExc_ValueError);
  py::register_exception<ozk::prolog::PrologError>(m, "PrologError", PyExc_ValueError);
  py::register_exception<ozk::dist::DistError>(m, "DistError", PyExc_ValueError);

  m.def("run", &run, py::arg("source"), py::arg("policy") = "fifo", py::arg("seed") = 0,
        py::arg("max_steps") = 100'000'000, py::arg("prelude") = true,
        "Run a kernel program; returns outcome, output lines, virtual clock and failure text.");

  m.def(
      "translate",
      [](const std::string& text, bool generators) {
        ozk::prolog::Options o;
        o.bagof_generators = generators;
        return ozk::prolog::translate_source(text, o);
      },
      py::arg("text"), py::arg("bagof_generators") = false, "Kernel source for a Prolog program.");

  m.def(
      "run_prolog",
      [](const std::string& text, const std::string& query, bool all, bool generators) {
        return run(prolog_source(text, query, all, generators), "fifo", 0, 100'000'000, true);
      },
      py::arg("text"), py::arg("query"), py::arg("all") = false, py::arg("bagof_generators") = false);

  m.def(
      "dist_run",
      [](const std::string& source, const std::string& placement, std::uint64_t net_seed, std::uint64_t sched_seed) {
        ozk::dist::SimOptions so;
        so.net_seed = net_seed;
        so.delivery = net_seed ? ozk::dist::Delivery::SeededShuffle : ozk::dist::Delivery::FifoPerLink;
        so.runtime.seed = sched_seed;
        if (sched_seed) so.runtime.policy = ozk::SchedPolicy::Random;
        ozk::dist::Simulation sim(so);
        sim.load(source, ozk::dist::parse_placement(placement));
        auto r = sim.run();
        py::dict d = result(r.outcome, r.all_outputs(), r.clock, r.failure);
        d["messages"] = r.messages;
        d["delivered"] = r.delivered;
        return d;
      },
      py::arg("source"), py::arg("placement"), py::arg("net_seed") = 0, py::arg("sched_seed") = 0,
      "Run a program on simulated nodes; placement like '1=0,2=1,main=0'.");

  py::class_<ozk::Runtime>(m, "Runtime")
      .def(py::init([](const std::string& policy, std::uint64_t seed, bool prelude) {
             return std::make_unique<ozk::Runtime>(options(policy, seed, 100'000'000, prelude));
           }),
           py::arg("policy") = "fifo", py::arg("seed") = 0, py::arg("prelude") = true)
      .def("load", [](ozk::Runtime& rt, const std::string& s) { rt.load(s); })
      .def("run", [](ozk::Runtime& rt) { return std::string(ozk::outcome_name(rt.run())); })
      .def("output", &ozk::Runtime::output)
      .def("clock", &ozk::Runtime::clock)
      .def("expansions", &ozk::Runtime::expansions)
      .def("value", [](const ozk::Runtime& rt, const std::string& name) -> py::object {
        ozk::Ref r = rt.global(name);
        if (r == ozk::kNoRef) return py::none();
        return py::str(rt.render(r));
      });
}
