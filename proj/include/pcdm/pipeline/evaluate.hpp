#pragma once

// Reconstruction metrics over a dataset. Metrics stay in raw units here; the
// CSV applies the conventional CD x1000 / EMD x100 presentation scaling.

#include <functional>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "pcdm/losses/emd.hpp"
#include "pcdm/losses/losses.hpp"
#include "pcdm/pipeline/dataset.hpp"
#include "pcdm/pipeline/reconstruct.hpp"

namespace pcdm {

struct EvalRow {
    std::string name;
    double cd = 0.0;
    double emd = 0.0;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    double mean_cd = 0.0;
    double mean_emd = 0.0;
};

using Reconstructor = std::function<PointCloud(const NamedSample&, std::size_t)>;

inline EvalReport evaluate(const std::vector<NamedSample>& data,
                           const Reconstructor& reconstruct_fn) {
    if (data.empty()) throw ContractError("evaluate: empty test set");
    EvalReport report;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const PointCloud recon = reconstruct_fn(data[i], i);
        EvalRow row;
        row.name = data[i].name;
        row.cd = metric_cd(recon, data[i].sample.cloud);
        row.emd = metric_emd(recon, data[i].sample.cloud);
        report.mean_cd += row.cd;
        report.mean_emd += row.emd;
        report.rows.push_back(std::move(row));
    }
    report.mean_cd /= static_cast<double>(report.rows.size());
    report.mean_emd /= static_cast<double>(report.rows.size());
    return report;
}

/// Reconstruct each sample from its reference view (per-sample seed = seed +
/// index) and score against the ground-truth cloud.
inline EvalReport evaluate(ModelState& st, const std::vector<NamedSample>& data,
                           std::uint64_t seed) {
    return evaluate(data, [&](const NamedSample& item, std::size_t i) {
        return reconstruct(st, item.sample.image, item.sample.cloud.size(), seed + i)
            .final_cloud;
    });
}

/// Header, one row per sample, then a mean row. Scaled per convention.
inline void write_eval_csv(std::ostream& os, const EvalReport& report) {
    os << "name,cd_x1000,emd_x100\n";
    os << std::fixed << std::setprecision(6);
    for (const auto& row : report.rows)
        os << row.name << "," << row.cd * 1e3 << "," << row.emd * 1e2 << "\n";
    os << "mean," << report.mean_cd * 1e3 << "," << report.mean_emd * 1e2 << "\n";
}

}  // namespace pcdm
