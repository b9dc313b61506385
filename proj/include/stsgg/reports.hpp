#ifndef STSGG_REPORTS_HPP
#define STSGG_REPORTS_HPP

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "label_space.hpp"
#include "metrics.hpp"
#include "selftrain.hpp"

namespace stsgg {

/// Key/value pairs echoed as `# key = value` lines at the top of every output.
using ConfigEcho = std::vector<std::pair<std::string, std::string>>;

inline void write_echo(std::ostream& os, const ConfigEcho& echo) {
    for (const auto& [k, v] : echo) os << "# " << k << " = " << v << '\n';
}

inline std::string fmt17(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string fmt_fixed(double v, int digits) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

inline void write_iteration_log(std::ostream& os, const TrainLog& log, const PredicateCatalog& cat, const ConfigEcho& echo) {
    write_echo(os, echo);
    os << "iteration,epoch,loss_total,loss_annotated,loss_bg,loss_pseudo,loss_gsl,n_annotated,n_bg,n_pseudo";
    for (int c = 1; c <= cat.num_foreground(); ++c) os << ",tau_" << c;
    for (int c = 1; c <= cat.num_foreground(); ++c) os << ",cum_" << c;
    os << '\n';
    for (const auto& r : log.iterations) {
        os << r.iteration << ',' << r.epoch << ',' << fmt17(r.loss.total) << ',' << fmt17(r.loss.annotated) << ','
           << fmt17(r.loss.background) << ',' << fmt17(r.loss.pseudo) << ',' << fmt17(r.loss_gsl) << ',' << r.n_annotated
           << ',' << r.n_background << ',' << r.n_pseudo;
        for (double t : r.tau) os << ',' << fmt17(t);
        for (std::size_t c = 1; c < r.cumulative.size(); ++c) os << ',' << r.cumulative[c];
        os << '\n';
    }
}

inline void write_epoch_log(std::ostream& os, const TrainLog& log, const ConfigEcho& echo) {
    write_echo(os, echo);
    os << "epoch,iteration,mean_loss";
    if (!log.epochs.empty())
        for (int k : log.epochs.front().ks) os << ",R@" << k << ",mR@" << k << ",F@" << k;
    os << '\n';
    for (const auto& e : log.epochs) {
        os << e.epoch << ',' << e.iteration << ',' << fmt17(e.mean_loss);
        for (std::size_t i = 0; i < e.ks.size(); ++i) {
            const bool has = i < e.recall.size();
            os << ',' << (has ? fmt17(e.recall[i]) : "nan") << ',' << (has ? fmt17(e.mean_recall[i]) : "nan") << ','
               << (has ? fmt17(e.f[i]) : "nan");
        }
        os << '\n';
    }
}

/// Threshold trajectory: iteration, tau_1..tau_K.
inline void write_threshold_log(std::ostream& os, const TrainLog& log, const PredicateCatalog& cat, const ConfigEcho& echo) {
    write_echo(os, echo);
    os << "iteration";
    for (int c = 1; c <= cat.num_foreground(); ++c) os << ",tau_" << c;
    os << '\n';
    for (const auto& r : log.iterations) os << threshold_row(r.iteration, r.tau) << '\n';
}

inline void write_assignments(std::ostream& os, const std::vector<PseudoAssignment>& a, const ConfigEcho& echo) {
    write_echo(os, echo);
    os << "iteration,scene_id,triplet,class,confidence\n";
    for (const auto& e : a)
        os << e.iteration << ',' << e.scene_id << ',' << e.triplet << ',' << e.cls << ',' << fmt17(e.confidence) << '\n';
}

inline void write_eval_summary(std::ostream& os, const EvalReport& rep, const ConfigEcho& echo) {
    write_echo(os, echo);
    os << "K,R,mR,F,mR_head,mR_body,mR_tail\n";
    for (std::size_t i = 0; i < rep.ks.size(); ++i) {
        const auto& g = rep.group_mean_recall[i];
        os << rep.ks[i] << ',' << fmt17(rep.recall[i]) << ',' << fmt17(rep.mean_recall[i]) << ',' << fmt17(rep.f[i]) << ','
           << fmt17(g[0]) << ',' << fmt17(g[1]) << ',' << fmt17(g[2]) << '\n';
    }
}

inline void write_eval_per_class(std::ostream& os, const EvalReport& rep, const PredicateCatalog& cat, const ConfigEcho& echo) {
    write_echo(os, echo);
    os << "class,name,train_count,group";
    for (int k : rep.ks) os << ",R@" << k;
    os << '\n';
    for (int c = 1; c <= cat.num_foreground(); ++c) {
        static const char* groups[] = {"head", "body", "tail"};
        os << c << ',' << cat.class_names[static_cast<std::size_t>(c)] << ',' << cat.count(c) << ','
           << groups[class_group(c, cat.num_foreground())];
        for (const auto& pc : rep.per_class) os << ',' << fmt17(pc[static_cast<std::size_t>(c)]);
        os << '\n';
    }
}

/// Table-1 style block: "R@K / mR@K / F@K" rounded to one decimal.
inline void print_eval_table(std::ostream& os, const std::string& label, const EvalReport& rep) {
    os << "model";
    for (int k : rep.ks) os << "  R@" << k << "  mR@" << k << "  F@" << k;
    os << '\n' << label;
    for (std::size_t i = 0; i < rep.ks.size(); ++i)
        os << "  " << fmt_fixed(rep.recall[i], 1) << "  " << fmt_fixed(rep.mean_recall[i], 1) << "  " << fmt_fixed(rep.f[i], 1);
    os << '\n';
}

inline void write_audit(std::ostream& os, const PseudoLabelAudit& a, const PredicateCatalog& cat, const ConfigEcho& echo) {
    write_echo(os, echo);
    os << "class,name,assigned,correct,precision,masked_truth,recovered,recall\n";
    for (int c = 1; c <= cat.num_foreground(); ++c) {
        const auto i = static_cast<std::size_t>(c);
        os << c << ',' << cat.class_names[i] << ',' << a.assigned[i] << ',' << a.correct[i] << ',' << fmt17(a.precision[i])
           << ',' << a.masked_truth[i] << ',' << a.recovered[i] << ',' << fmt17(a.recall[i]) << '\n';
    }
    os << "all,total," << a.total_assigned << ',' << a.total_correct << ',' << fmt17(a.overall_precision()) << ",,,\n";
    os << "# incorrect = " << a.total_incorrect << "\n# bg_violations = " << a.bg_violations << '\n';
}

} // namespace stsgg

#endif // STSGG_REPORTS_HPP
