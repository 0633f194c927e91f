// mu: command-line front end.
//
// Exit codes: 0 ok, 2 a certificate failed re-verification, 3 undecided,
// 4 input error.

#include <atomic>
#include <chrono>
#include <iostream>
#include <mutex>
#include <thread>

#include "CLI11.hpp"
#include "ssv/ssv.hpp"

using namespace ssv;

namespace {

enum Exit { kOk = 0, kVerify = 2, kUndecided = 3, kInput = 4 };

struct Args {
  std::string problem;
  std::string out;
  std::uint64_t seed = 0;
  int restarts = 64;
  std::optional<double> gamma;
  int jobs = 1;
  double tol = 1e-8;
};

class Timer {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

SteinOptions steinOpts(const Args& a) {
  SteinOptions o;
  o.tol = a.tol;
  o.seed = a.seed;
  return o;
}

void emit(const Args& a, const Report& r) {
  const std::string text = canonicalDump(r.toJson());
  if (a.out.empty())
    std::cout << text;
  else
    atomicWrite(a.out, text);
}

Report startReport(const std::string& command, const Args& a, const std::string& inputText) {
  Report r;
  r.command = command;
  r.seed = a.seed;
  r.inputDigest = hexDigest(inputText);
  return r;
}

const Mat& needMatrix(const ProblemFile& p) {
  if (!p.M) throw InputError("problem: this command needs a 'matrix' field");
  return *p.M;
}

double needGamma(const Args& a, const ProblemFile& p) {
  if (a.gamma) return *a.gamma;
  if (p.gamma) return *p.gamma;
  throw InputError("this command needs --gamma or a 'gamma' field in the problem");
}

Json analyzeResults(const ProblemFile& p, const MuReport& m, Json& certs, Json& verify) {
  const Mat& M = *p.M;
  Json res{{"muLower", m.muLower},
           {"muHat", m.muHat},
           {"muHatLower", m.upper.lower},
           {"muHatUpper", m.upper.upper},
           {"gap", m.gap},
           {"lowerSource", m.lowerSource},
           {"special", toString(m.special)},
           {"frontier", Json{{"s", m.frontier.s}, {"f", m.frontier.f}, {"tightExpected", m.frontier.tightExpected()}}}};
  if (m.exact) res["exact"] = *m.exact;
  if (m.lowerCert) {
    certs["lowerDelta"] = gammasToJson(m.lowerCert->delta.blocks());
    verify["lowerResidual"] = m.lowerCert->residual;
    verify["lowerSigmaMin"] = m.lowerCert->sigmaMin;
    verify["lowerDeltaNorm"] = m.lowerCert->delta.norm();
  }
  if (!m.upper.gammas.empty()) {
    certs["gammas"] = gammasToJson(m.upper.gammas);
    verify["scaledNorm"] = scaledNorm(p.graph, M, m.upper.gammas);
  }
  return res;
}

MuOptions muOpts(const Args& a) {
  MuOptions o;
  o.lower.restarts = a.restarts;
  o.lower.seed = a.seed;
  o.upper.stein = steinOpts(a);
  return o;
}

int cmdAnalyze(const Args& a) {
  Timer t;
  const std::string text = readFile(a.problem);
  const ProblemFile p = parseProblemText(text, a.problem);
  const MuReport m = analyze(p.graph, needMatrix(p), muOpts(a));
  Report r = startReport("analyze", a, text);
  r.results = analyzeResults(p, m, r.certificates, r.verification);
  r.warnings = m.warnings;
  if (!m.upper.gammas.empty() && !(r.verification["scaledNorm"].get<double>() < m.upper.upper)) {
    r.warnings.push_back("scaling certificate does not re-verify");
    r.timings["total"] = t.seconds();
    emit(a, r);
    return kVerify;
  }
  r.timings["total"] = t.seconds();
  emit(a, r);
  return kOk;
}

int cmdBft(const Args& a) {
  Timer t;
  const std::string text = readFile(a.problem);
  const ProblemFile p = parseProblemText(text, a.problem);
  BftProblem prob(p.graph, needMatrix(p));
  Report r = startReport("bft", a, text);
  int code = kOk;
  if (a.gamma || p.gamma) {
    const double gamma = needGamma(a, p);
    const BftVerdict v = bftDecide(prob, gamma, steinOpts(a));
    r.results["gamma"] = gamma;
    if (auto* lt = std::get_if<bft_verdict::EnhancedLT1>(&v)) {
      r.results["verdict"] = "enhanced<1";
      r.certificates["gammas"] = lt->gammas;
      r.verification["margin"] = lt->margin;
    } else if (auto* ge = std::get_if<bft_verdict::EnhancedGE1>(&v)) {
      r.results["verdict"] = "enhanced>=1";
      r.results["traces"] = ge->traces;
      r.certificates["upsilon"] = matrixToJson(ge->upsilon);
      r.certificates["delta"] = gammasToJson(ge->delta.blocks());
      r.verification["residual"] = ge->residual;
      r.verification["deltaNorm"] = ge->deltaNorm;
    } else {
      r.results["verdict"] = "undecided";
      code = kUndecided;
    }
    if (code == kOk) {
      const std::string why = verifyBft(prob, gamma, v, a.tol);
      if (!why.empty()) {
        r.warnings.push_back("re-verification failed: " + why);
        code = kVerify;
      }
    }
  } else {
    const BftMuResult m = bftMu(prob, 1e-5, steinOpts(a));
    r.results = Json{{"mu", m.mu}, {"lower", m.lower}, {"upper", m.upper}, {"undecidedSteps", m.undecided}};
    r.certificates["gammas"] = m.gammas;
    if (m.upper > 0.0) {
      const BftVerdict v = bftDecide(prob, m.upper, steinOpts(a));
      const std::string why = verifyBft(prob, m.upper, v, a.tol);
      r.verification["upperVerdict"] = why.empty() ? "ok" : why;
      if (!why.empty() && !std::holds_alternative<bft_verdict::Undecided>(v)) code = kVerify;
    }
    if (m.undecided > 0) r.warnings.push_back(std::to_string(m.undecided) + " bisection steps were undecided");
  }
  r.timings["total"] = t.seconds();
  emit(a, r);
  return code;
}

int cmdSynthTv(const Args& a) {
  Timer t;
  const std::string text = readFile(a.problem);
  const ProblemFile p = parseProblemText(text, a.problem);
  const double gamma = needGamma(a, p);
  TvOutcome out = synthesizeTv(p.graph, needMatrix(p), gamma, steinOpts(a));
  Report r = startReport("synth-tv", a, text);
  r.results["gamma"] = gamma;
  int code = kOk;
  if (auto* s = std::get_if<TvSynthesis>(&out)) {
    r.results["verdict"] = "destabilizer";
    r.results["horizon"] = s->tv.rangeAxis.horizon();
    r.results["windows"] = s->tv.rangeAxis.windows();
    r.certificates["delta"] = gammasToJson(s->tv.full.blocks());
    r.certificates["h"] = matrixToJson(s->h);
    r.certificates["upsilon"] = matrixToJson(s->upsilon);
    const bool ok = verifyTv(p.graph, *p.M, gamma, *s);
    r.verification = Json{{"residual", s->residual}, {"deltaNorm", s->deltaNorm}, {"structureDefect", s->structureDefect}};
    if (!ok) {
      r.warnings.push_back("time-varying certificate failed re-verification");
      code = kVerify;
    }
  } else if (auto* n = std::get_if<TvNotPossible>(&out)) {
    r.results["verdict"] = "not-possible";
    r.certificates["gammas"] = gammasToJson(n->gammas);
    const double sn = scaledNorm(p.graph, *p.M / gamma, n->gammas);
    r.verification["scaledNorm"] = sn;
    if (!(sn < 1.0)) {
      r.warnings.push_back("scaling certificate failed re-verification");
      code = kVerify;
    }
  } else {
    r.results["verdict"] = "undecided";
    code = kUndecided;
  }
  r.timings["total"] = t.seconds();
  emit(a, r);
  return code;
}

int cmdBrl(const Args& a) {
  Timer t;
  const std::string text = readFile(a.problem);
  const ProblemFile p = parseProblemText(text, a.problem);
  if (!p.colligation) throw InputError("problem: brl needs a 'colligation' field");
  const Colligation& col = *p.colligation;
  BrlOutcome out = brlCheck(p.graph, col, steinOpts(a));
  Report r = startReport("brl", a, text);
  int code = kOk;
  if (auto* c = std::get_if<BrlCertificate>(&out)) {
    r.results["verdict"] = "strict-bounded-real";
    r.results["margin"] = c->margin;
    r.certificates["gammas"] = gammasToJson(c->gammas);
    r.certificates["scaled"] = colligationToJson(c->scaled);
    const double sampled = sampledTransferNorm(p.graph, col, 50, a.seed);
    const double defect = transferDefect(p.graph, col, c->scaled, 20, a.seed);
    r.verification = Json{{"lmiMargin", c->lmiMargin}, {"sampledTransferNorm", sampled}, {"transferDefect", defect}};
    if (!(c->lmiMargin > 0.0) || sampled > 1.0 - c->margin / 2 || defect > 1e-8 * std::max(1.0, opNorm(col.block()))) {
      r.warnings.push_back("bounded-real certificate failed re-verification");
      code = kVerify;
    }
  } else if (auto* inf = std::get_if<BrlInfeasible>(&out)) {
    r.results["verdict"] = "not-strict-bounded-real";
    r.certificates["upsilon"] = matrixToJson(inf->upsilon);
  } else {
    r.results["verdict"] = "undecided";
    code = kUndecided;
  }
  r.timings["total"] = t.seconds();
  emit(a, r);
  return code;
}

int cmdFreq(const Args& a) {
  Timer t;
  const std::string text = readFile(a.problem);
  const ProblemFile p = parseProblemText(text, a.problem);
  if (!p.system) throw InputError("problem: freq needs a 'system' field");
  const double gamma = a.gamma ? *a.gamma : p.gamma.value_or(1.0);
  FreqOutcome out = freqDomainScale(p.graph, *p.system, gamma, 512, steinOpts(a));
  Report r = startReport("freq", a, text);
  r.results["gamma"] = gamma;
  int code = kOk;
  if (auto* c = std::get_if<FreqCertificate>(&out)) {
    r.results["verdict"] = "scaled";
    r.certificates["gammas"] = gammasToJson(c->gammas);
    r.certificates["stateGamma"] = matrixToJson(c->stateGamma);
    r.verification = Json{{"sweepMax", c->sweepMax}, {"sweepPoints", c->sweepPoints}, {"violations", c->violations}};
    if (c->violations > 0) {
      r.warnings.push_back("frequency sweep exceeds one");
      code = kVerify;
    }
  } else if (auto* inf = std::get_if<FreqInfeasible>(&out)) {
    r.results["verdict"] = "not-scaled";
    r.certificates["upsilon"] = matrixToJson(inf->upsilon);
  } else {
    r.results["verdict"] = "undecided";
    code = kUndecided;
  }
  r.timings["total"] = t.seconds();
  emit(a, r);
  return code;
}

int cmdGapScan(const Args& a) {
  Timer t;
  std::string text;
  std::vector<ProblemFile> probs;
  if (a.problem.empty()) {
    probs = corpusGenerate(a.seed);
    text = serializeCorpus(a.seed, probs);
  } else {
    text = readFile(a.problem);
    probs = parseProblemsText(text, a.problem);
  }
  std::vector<Json> rows(probs.size());
  std::vector<int> codes(probs.size(), kOk);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < probs.size(); i = next++) {
      const ProblemFile& p = probs[i];
      Json row{{"name", p.name}};
      try {
        const MuReport m = analyze(p.graph, needMatrix(p), muOpts(a));
        row["muLower"] = m.muLower;
        row["muHat"] = m.muHat;
        row["relGap"] = m.muHat > 0.0 ? m.gap / m.muHat : 0.0;
        row["tightExpected"] = m.frontier.tightExpected();
        if (m.lowerCert) row["lowerResidual"] = m.lowerCert->residual;
      } catch (const VerificationError& e) {
        row["error"] = e.what();
        codes[i] = kVerify;
      } catch (const InputError& e) {
        row["error"] = e.what();
        codes[i] = kInput;
      }
      rows[i] = row;
    }
  };
  std::vector<std::thread> pool;
  for (int j = 1; j < std::max(1, a.jobs); ++j) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();

  Report r = startReport("gap-scan", a, text);
  Json gaps = Json::array();
  for (const auto& row : rows)
    if (row.contains("relGap") && row["relGap"].get<double>() > 2e-2) gaps.push_back(row["name"]);
  r.results = Json{{"instances", rows}, {"gapInstances", gaps}};
  r.timings["total"] = t.seconds();
  emit(a, r);
  // A failed re-verification outranks a bad instance.
  for (int c : codes)
    if (c == kVerify) return kVerify;
  for (int c : codes)
    if (c == kInput) return kInput;
  return kOk;
}

int cmdCorpus(const Args& a) {
  const std::string text = serializeCorpus(a.seed, corpusGenerate(a.seed));
  if (a.out.empty())
    std::cout << text;
  else
    atomicWrite(a.out, text);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"structured singular value analysis"};
  app.require_subcommand(1);
  Args a;
  auto common = [&](CLI::App* sub, bool needProblem) {
    auto* opt = sub->add_option("--problem", a.problem, "problem file (JSON)");
    if (needProblem) opt->required();
    sub->add_option("--out", a.out, "report file; stdout when absent");
    sub->add_option("--seed", a.seed, "64-bit seed");
    sub->add_option("--tol", a.tol, "feasibility tolerance")->check(CLI::PositiveNumber);
  };
  auto* analyzeCmd = app.add_subcommand("analyze", "mu lower bound, muHat and certificates");
  common(analyzeCmd, true);
  analyzeCmd->add_option("--restarts", a.restarts)->check(CLI::NonNegativeNumber);
  auto* bftCmd = app.add_subcommand("bft", "BFT-enhanced decision or value");
  common(bftCmd, true);
  bftCmd->add_option("--gamma", a.gamma)->check(CLI::PositiveNumber);
  auto* tvCmd = app.add_subcommand("synth-tv", "time-varying destabilizer or scaling certificate");
  common(tvCmd, true);
  tvCmd->add_option("--gamma", a.gamma)->check(CLI::PositiveNumber);
  auto* brlCmd = app.add_subcommand("brl", "strict bounded real check for a colligation");
  common(brlCmd, true);
  auto* freqCmd = app.add_subcommand("freq", "constant scaling of a state-space system");
  common(freqCmd, true);
  freqCmd->add_option("--gamma", a.gamma)->check(CLI::PositiveNumber);
  auto* gapCmd = app.add_subcommand("gap-scan", "analyze every instance of a corpus");
  common(gapCmd, false);
  gapCmd->add_option("--restarts", a.restarts)->check(CLI::NonNegativeNumber);
  gapCmd->add_option("--jobs", a.jobs)->check(CLI::PositiveNumber);
  auto* corpusCmd = app.add_subcommand("corpus", "write the generated corpus");
  corpusCmd->add_option("--out", a.out);
  corpusCmd->add_option("--seed", a.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInput;
  }

  try {
    if (*analyzeCmd) return cmdAnalyze(a);
    if (*bftCmd) return cmdBft(a);
    if (*tvCmd) return cmdSynthTv(a);
    if (*brlCmd) return cmdBrl(a);
    if (*freqCmd) return cmdFreq(a);
    if (*gapCmd) return cmdGapScan(a);
    if (*corpusCmd) return cmdCorpus(a);
  } catch (const VerificationError& e) {
    std::cerr << "verification failed: " << e.what() << "\n";
    return kVerify;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInput;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kInput;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "file error: " << e.what() << "\n";
    return kInput;
  }
  return kInput;
}
