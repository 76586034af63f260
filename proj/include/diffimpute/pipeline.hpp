#pragma once

#include <cstdint>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "diffimpute/baselines.hpp"
#include "diffimpute/bench.hpp"
#include "diffimpute/data.hpp"
#include "diffimpute/denoiser.hpp"
#include "diffimpute/sampling.hpp"
#include "diffimpute/schedule.hpp"

namespace diffimpute {

/// Baseline fill with statistics from `context`. The context is copied into
/// the closure.
inline Imputer baseline_imputer(BaselineKind kind, Tensor<double> context) {
    auto ctx = std::make_shared<const Tensor<double>>(std::move(context));
    return [kind, ctx](const MaskedTable<double>& table, std::uint64_t, std::uint64_t) {
        return baseline_impute(kind, table.x_obs, table.mask, *ctx);
    };
}

/// Diffusion imputation; ensemble member r of mask seed s runs on stream r of
/// the sampler seed derived from (opts.seed, s). The model must outlive the
/// returned closure.
inline Imputer diffusion_imputer(const Denoiser<double>& model, ScheduleKind kind, SamplerOptions opts) {
    opts.validate();
    auto sched = std::make_shared<const DiffusionSchedule>(build_schedule(kind, opts.T_sampling));
    return [&model, sched, opts](const MaskedTable<double>& table, std::uint64_t mask_seed, std::uint64_t r) {
        SamplerOptions o = opts;
        o.seed = Rng::derive(opts.seed, mask_seed).next_u64();
        return impute_once(model, table, *sched, o, r);
    };
}

// ---------------------------------------------------------------------------
// ablation presets

struct AblationSetting {
    std::string label;
    SamplerOptions opts;
};

inline const std::vector<int>& tau_sweep_values() {
    static const std::vector<int> taus{10, 25, 50, 100, 250, 500};
    return taus;
}

/// Expands whitespace-separated presets into sampler settings:
///   tau-sweep   DDIM with tau in {10, 25, 50, 100, 250, 500}; tau = T_sampling
///               runs the dense sampler. Jump settings come from `base`.
///   j=1,5       harmonization with jump_n_sample = j, jump_length = 1
///   no-tst      the base options, for a model trained without time embedding
inline std::vector<AblationSetting> ablation_settings(const std::string& presets, const SamplerOptions& base,
                                                      const DenoiserConfig& model) {
    std::vector<AblationSetting> out;
    std::stringstream in(presets);
    std::string item;
    while (in >> item) {
        if (item == "tau-sweep") {
            for (int tau : tau_sweep_values()) {
                if (tau > base.T_sampling)
                    throw InputError("tau-sweep needs T_sampling >= " + std::to_string(tau) + ", got " +
                                     std::to_string(base.T_sampling));
                SamplerOptions o = base;
                if (tau < base.T_sampling) o.tau = tau;
                else o.tau.reset(); // the full-length row is the dense sampler
                out.push_back({"tau=" + std::to_string(tau), o});
            }
        } else if (item.rfind("j=", 0) == 0) {
            std::stringstream vs(item.substr(2));
            std::string v;
            bool any = false;
            while (std::getline(vs, v, ',')) {
                int j = 0;
                try {
                    j = std::stoi(v);
                } catch (const std::exception&) {
                    throw InputError("preset '" + item + "': bad j value '" + v + "'");
                }
                if (j < 1) throw InputError("preset '" + item + "': j must be >= 1");
                SamplerOptions o = base;
                o.jump_n_sample = j;
                o.jump_length = 1;
                out.push_back({"j=" + std::to_string(j), o});
                any = true;
            }
            if (!any) throw InputError("preset '" + item + "': no j values");
        } else if (item == "no-tst") {
            if (model.time_embedding)
                throw InputError("preset no-tst needs a checkpoint trained with time_embedding = false");
            out.push_back({"no-tst", base});
        } else {
            throw InputError("unknown ablation preset '" + item + "' (expected tau-sweep, j=..., no-tst)");
        }
    }
    if (out.empty()) throw InputError("no ablation presets given");
    return out;
}

struct AblationRow {
    std::string setting;
    std::string arch;
    double mse_mean = 0;
    std::vector<EvalRow> seeds;
};

/// Mean MSE per preset setting for one model, evaluated on complete `x`
/// under `mask` (its seed is replaced by eval.seed + s for each mask seed).
inline std::vector<AblationRow> run_ablation(const Denoiser<double>& model, ScheduleKind kind,
                                             const std::vector<AblationSetting>& settings, const Tensor<double>& x,
                                             const MaskSpec& mask, const EvalOptions& eval) {
    std::vector<AblationRow> out;
    for (const auto& s : settings) {
        auto rows = ensemble_eval(s.label, diffusion_imputer(model, kind, s.opts), x, {mask}, eval);
        AblationRow row{s.label, to_string(model.config().arch), 0, rows};
        for (const auto& r : rows) row.mse_mean += r.mse;
        row.mse_mean /= static_cast<double>(rows.size());
        out.push_back(std::move(row));
    }
    return out;
}

/// Settings x architectures grid of mean MSE.
inline TextTable ablation_table(const std::vector<AblationRow>& rows) {
    std::vector<std::string> settings, archs;
    std::map<std::pair<std::string, std::string>, double> cell;
    for (const auto& r : rows) {
        if (std::find(settings.begin(), settings.end(), r.setting) == settings.end()) settings.push_back(r.setting);
        if (std::find(archs.begin(), archs.end(), r.arch) == archs.end()) archs.push_back(r.arch);
        cell[{r.setting, r.arch}] = r.mse_mean;
    }
    std::vector<std::string> header{"setting"};
    header.insert(header.end(), archs.begin(), archs.end());
    TextTable t(header);
    for (const auto& s : settings) {
        std::vector<std::string> line{s};
        for (const auto& a : archs) {
            auto it = cell.find({s, a});
            line.push_back(it == cell.end() ? "/" : fixed(it->second));
        }
        t.add_row(std::move(line));
    }
    return t;
}

} // namespace diffimpute
