#include "fairvar/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string_view>

#include "fairvar/errors.hpp"
#include "fairvar/rng.hpp"

namespace fairvar {

namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line)
{
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(trim(line.substr(start)));
            break;
        }
        fields.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
    return fields;
}

bool parse_real(std::string_view text, double& out)
{
    if (text.empty()) {
        return false;
    }
    if (text.front() == '+') {
        text.remove_prefix(1);
    }
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc() && ptr == text.data() + text.size() && std::isfinite(out);
}

std::string format_real(double v)
{
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

void validate_permutation_input(std::size_t batch_size, const RatioSpec& spec)
{
    if (batch_size < 4) {
        throw std::invalid_argument("build_ratio_order: batch size must be at least 4");
    }
    if (!(spec.pos_to_neg > 0.0) || !std::isfinite(spec.pos_to_neg)) {
        throw std::invalid_argument("build_ratio_order: ratio must be a positive finite number");
    }
    if (spec.varied_group != 0 && spec.varied_group != 1) {
        throw std::invalid_argument("build_ratio_order: varied group must be 0 or 1");
    }
}

}  // namespace

SubgroupCounts Dataset::subgroup_counts() const noexcept
{
    SubgroupCounts counts{};
    for (std::size_t i = 0; i < size(); ++i) {
        ++counts[subgroup(i)];
    }
    return counts;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const
{
    Dataset out;
    out.columns = columns;
    out.features.resize(rows.size(), dim());
    out.labels.reserve(rows.size());
    out.sensitive.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto src = features.row(rows[i]);
        std::copy(src.begin(), src.end(), out.features.row(i).begin());
        out.labels.push_back(labels[rows[i]]);
        out.sensitive.push_back(sensitive[rows[i]]);
    }
    return out;
}

void Dataset::validate() const
{
    using Kind = DataError::Kind;
    if (size() == 0) {
        throw DataError(Kind::empty_dataset, "dataset has no rows");
    }
    if (features.rows != size() || sensitive.size() != size() || columns.size() != dim()) {
        throw DataError(Kind::invalid, "dataset fields have inconsistent shapes");
    }
    for (std::size_t i = 0; i < size(); ++i) {
        if ((labels[i] != 0 && labels[i] != 1) || (sensitive[i] != 0 && sensitive[i] != 1)) {
            throw DataError(Kind::non_binary_value, "row " + std::to_string(i) + " has a non-binary label or group",
                            i);
        }
        for (std::size_t c = 0; c < dim(); ++c) {
            if (!std::isfinite(features(i, c))) {
                throw DataError(Kind::non_numeric_cell, "row " + std::to_string(i) + " has a non-finite feature", i,
                                columns[c]);
            }
        }
    }
}

bool DataOrder::is_permutation() const
{
    std::vector<bool> seen(indices.size(), false);
    for (std::size_t idx : indices) {
        if (idx >= indices.size() || seen[idx]) {
            return false;
        }
        seen[idx] = true;
    }
    return true;
}

std::vector<std::size_t> apportion(std::size_t total, std::span<const double> shares,
                                   std::span<const std::size_t> priority)
{
    std::vector<std::size_t> order(shares.size());
    if (priority.empty()) {
        std::iota(order.begin(), order.end(), 0);
    } else {
        if (priority.size() != shares.size()) {
            throw std::invalid_argument("apportion: priority must list every share");
        }
        order.assign(priority.begin(), priority.end());
    }

    std::vector<std::size_t> counts(shares.size(), 0);
    std::vector<double> remainders(shares.size(), 0.0);
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < shares.size(); ++i) {
        if (!(shares[i] >= 0.0)) {
            throw std::invalid_argument("apportion: shares must be nonnegative");
        }
        const double exact = shares[i] * static_cast<double>(total);
        const double whole = std::floor(exact);
        counts[i] = static_cast<std::size_t>(whole);
        remainders[i] = exact - whole;
        assigned += counts[i];
    }
    if (assigned > total) {
        throw std::invalid_argument("apportion: shares sum above 1");
    }
    // stable sort keeps the priority order among equal remainders
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
    for (std::size_t k = 0; assigned < total; ++k) {
        ++counts[order[k % order.size()]];
        ++assigned;
    }
    return counts;
}

Dataset parse_csv(const std::string& text, const std::string& label_column, const std::string& sensitive_column)
{
    using Kind = DataError::Kind;
    std::vector<std::string_view> lines;
    {
        std::string_view rest(text);
        while (!rest.empty()) {
            const std::size_t nl = rest.find('\n');
            lines.push_back(rest.substr(0, nl));
            if (nl == std::string_view::npos) {
                break;
            }
            rest.remove_prefix(nl + 1);
        }
    }
    while (!lines.empty() && trim(lines.back()).empty()) {
        lines.pop_back();
    }
    if (lines.empty()) {
        throw DataError(Kind::empty_dataset, "csv input is empty (no header row)");
    }

    const auto header = split_fields(lines.front());
    std::size_t label_idx = header.size();
    std::size_t sens_idx = header.size();
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == label_column) {
            label_idx = c;
        } else if (header[c] == sensitive_column) {
            sens_idx = c;
        }
    }
    if (label_idx == header.size()) {
        throw DataError(Kind::missing_column, "label column '" + label_column + "' not found in header", 1,
                        label_column);
    }
    if (sens_idx == header.size()) {
        throw DataError(Kind::missing_column, "sensitive column '" + sensitive_column + "' not found in header", 1,
                        sensitive_column);
    }

    Dataset data;
    std::vector<std::size_t> feature_cols;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c != label_idx && c != sens_idx) {
            feature_cols.push_back(c);
            data.columns.emplace_back(header[c]);
        }
    }

    std::vector<double> cells;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        const std::size_t row = li + 1;
        if (trim(lines[li]).empty()) {
            continue;
        }
        const auto fields = split_fields(lines[li]);
        if (fields.size() != header.size()) {
            throw DataError(Kind::invalid,
                            "row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                                " fields, expected " + std::to_string(header.size()),
                            row);
        }
        auto binary = [&](std::size_t c) {
            double v = 0.0;
            if (!parse_real(fields[c], v) || (v != 0.0 && v != 1.0)) {
                throw DataError(Kind::non_binary_value,
                                "row " + std::to_string(row) + ", column '" + std::string(header[c]) +
                                    "': expected 0 or 1, got '" + std::string(fields[c]) + "'",
                                row, std::string(header[c]));
            }
            return static_cast<int>(v);
        };
        data.labels.push_back(binary(label_idx));
        data.sensitive.push_back(binary(sens_idx));
        for (std::size_t c : feature_cols) {
            double v = 0.0;
            if (!parse_real(fields[c], v)) {
                throw DataError(Kind::non_numeric_cell,
                                "row " + std::to_string(row) + ", column '" + std::string(header[c]) +
                                    "': not a finite number: '" + std::string(fields[c]) + "'",
                                row, std::string(header[c]));
            }
            cells.push_back(v);
        }
    }
    if (data.labels.empty()) {
        throw DataError(Kind::empty_dataset, "csv input has a header but no data rows");
    }
    data.features.rows = data.labels.size();
    data.features.cols = feature_cols.size();
    data.features.values = std::move(cells);
    return data;
}

Dataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                 const std::string& sensitive_column)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError(DataError::Kind::io, "cannot open '" + path.string() + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_csv(buffer.str(), label_column, sensitive_column);
}

std::string to_csv(const Dataset& data, const std::string& label_column, const std::string& sensitive_column)
{
    std::string out;
    for (const auto& name : data.columns) {
        out += name;
        out += ',';
    }
    out += label_column + ',' + sensitive_column + '\n';
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (double v : data.features.row(i)) {
            out += format_real(v);
            out += ',';
        }
        out += std::to_string(data.labels[i]) + ',' + std::to_string(data.sensitive[i]) + '\n';
    }
    return out;
}

Dataset synth_generate(const SynthSpec& spec)
{
    if (spec.n < kSubgroups) {
        throw std::invalid_argument("synth_generate: n must be at least 4 to represent every subgroup");
    }
    if (spec.dims < 2) {
        throw std::invalid_argument("synth_generate: at least 2 feature dimensions are required");
    }
    double total = 0.0;
    for (double p : spec.proportions) {
        if (!(p >= 0.0)) {
            throw std::invalid_argument("synth_generate: proportions must be nonnegative");
        }
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw std::invalid_argument("synth_generate: proportions must sum to 1");
    }
    if (!(spec.noise >= 0.0)) {
        throw std::invalid_argument("synth_generate: noise must be nonnegative");
    }

    const auto counts = apportion(spec.n, spec.proportions);
    Dataset grouped;
    grouped.features.resize(spec.n, spec.dims);
    grouped.labels.reserve(spec.n);
    grouped.sensitive.reserve(spec.n);
    for (std::size_t d = 0; d < spec.dims; ++d) {
        grouped.columns.push_back("x" + std::to_string(d));
    }

    Prng rng = Prng::from(spec.seed, kSynthStream);
    std::size_t row = 0;
    for (std::size_t slot = 0; slot < kSubgroups; ++slot) {
        const std::size_t sg = kSubgroupPriority[slot];
        const int a = subgroup_sensitive(sg);
        const int y = subgroup_label(sg);
        for (std::size_t k = 0; k < counts[slot]; ++k, ++row) {
            auto x = grouped.features.row(row);
            for (std::size_t d = 0; d < spec.dims; ++d) {
                x[d] = spec.noise * rng.gaussian();
            }
            x[0] += spec.separation * y;
            x[1] += spec.group_shift * a;
            grouped.labels.push_back(y);
            grouped.sensitive.push_back(a);
        }
    }

    std::vector<std::size_t> perm(spec.n);
    std::iota(perm.begin(), perm.end(), 0);
    Prng shuffler = Prng::from(spec.seed, kShuffleStream);
    shuffle(perm, shuffler);
    return grouped.subset(perm);
}

Splits split(const Dataset& data, const std::array<double, 3>& ratios, std::uint64_t seed)
{
    double total = 0.0;
    for (double r : ratios) {
        if (!(r > 0.0)) {
            throw std::invalid_argument("split: ratios must be positive");
        }
        total += r;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw std::invalid_argument("split: ratios must sum to 1");
    }
    const auto sizes = apportion(data.size(), ratios);
    for (std::size_t s : sizes) {
        if (s == 0) {
            throw DataError(DataError::Kind::empty_dataset, "split: a partition would be empty");
        }
    }

    std::vector<std::size_t> perm(data.size());
    std::iota(perm.begin(), perm.end(), 0);
    Prng rng = Prng::from(seed, kSplitStream);
    shuffle(perm, rng);

    const std::span<const std::size_t> all(perm);
    Splits out;
    out.train = data.subset(all.subspan(0, sizes[0]));
    out.validation = data.subset(all.subspan(sizes[0], sizes[1]));
    out.test = data.subset(all.subspan(sizes[0] + sizes[1], sizes[2]));
    return out;
}

DataOrder reference_order(std::size_t n, std::uint64_t shuffle_seed)
{
    DataOrder order;
    order.indices.resize(n);
    std::iota(order.indices.begin(), order.indices.end(), 0);
    Prng rng = Prng::from(shuffle_seed, kShuffleStream);
    shuffle(order.indices, rng);
    return order;
}

DataOrder epoch_order(const DataOrder& reference, int epoch)
{
    if (epoch < 1) {
        throw std::invalid_argument("epoch_order: epoch must be at least 1");
    }
    DataOrder order = reference;
    Prng rng = Prng::from(static_cast<std::uint64_t>(epoch), kShuffleStream);
    shuffle(order.indices, rng);
    return order;
}

RatioOrder build_ratio_order(const Dataset& train, const RatioSpec& spec, std::size_t batch_size, std::uint64_t seed)
{
    validate_permutation_input(batch_size, spec);
    const auto counts = train.subgroup_counts();
    const double n = static_cast<double>(train.size());

    RatioOrder result;
    auto& shares = result.target_shares;
    for (std::size_t sg = 0; sg < kSubgroups; ++sg) {
        shares[sg] = static_cast<double>(counts[sg]) / n;
    }
    const std::size_t pos = subgroup_index(spec.varied_group, 1);
    const std::size_t neg = subgroup_index(spec.varied_group, 0);
    const double group_share = shares[pos] + shares[neg];
    shares[pos] = group_share * spec.pos_to_neg / (1.0 + spec.pos_to_neg);
    shares[neg] = group_share / (1.0 + spec.pos_to_neg);
    const double norm = shares[0] + shares[1] + shares[2] + shares[3];
    for (double& s : shares) {
        s /= norm;
    }
    const auto per_batch = apportion(batch_size, shares, kSubgroupPriority);
    std::copy(per_batch.begin(), per_batch.end(), result.batch_counts.begin());

    Prng rng = Prng::from(seed, kShuffleStream);
    std::array<std::vector<std::size_t>, kSubgroups> pools;
    for (std::size_t i = 0; i < train.size(); ++i) {
        pools[train.subgroup(i)].push_back(i);
    }
    for (auto& pool : pools) {
        shuffle(pool, rng);
    }

    std::size_t n_batches = train.size();
    for (std::size_t sg = 0; sg < kSubgroups; ++sg) {
        if (per_batch[sg] > 0) {
            n_batches = std::min(n_batches, pools[sg].size() / per_batch[sg]);
        }
    }
    result.suffix_batches = n_batches;

    std::vector<std::size_t> suffix;
    suffix.reserve(n_batches * batch_size);
    for (std::size_t b = 0; b < n_batches; ++b) {
        const std::size_t start = suffix.size();
        for (std::size_t sg = 0; sg < kSubgroups; ++sg) {
            const auto first = pools[sg].begin() + static_cast<std::ptrdiff_t>(b * per_batch[sg]);
            suffix.insert(suffix.end(), first, first + static_cast<std::ptrdiff_t>(per_batch[sg]));
        }
        shuffle(std::span(suffix).subspan(start), rng);
    }

    std::vector<std::size_t>& prefix = result.order.indices;
    prefix.reserve(train.size());
    for (std::size_t sg = 0; sg < kSubgroups; ++sg) {
        const auto used = static_cast<std::ptrdiff_t>(n_batches * per_batch[sg]);
        prefix.insert(prefix.end(), pools[sg].begin() + used, pools[sg].end());
    }
    shuffle(prefix, rng);
    result.prefix_size = prefix.size();
    prefix.insert(prefix.end(), suffix.begin(), suffix.end());
    return result;
}

int minority_positive_group(const Dataset& train)
{
    const auto counts = train.subgroup_counts();
    return counts[subgroup_index(1, 1)] < counts[subgroup_index(0, 1)] ? 1 : 0;
}

RatioOrder equal_order(const Dataset& train, std::size_t batch_size, std::uint64_t seed)
{
    return build_ratio_order(train, {minority_positive_group(train), 1.0}, batch_size, seed);
}

RatioOrder adv_order(const Dataset& train, std::size_t batch_size, std::uint64_t seed)
{
    return build_ratio_order(train, {minority_positive_group(train), 1.0 / 3.0}, batch_size, seed);
}

std::array<double, kSubgroups> reweighing_factors(const Dataset& train)
{
    const auto counts = train.subgroup_counts();
    for (std::size_t sg = 0; sg < kSubgroups; ++sg) {
        if (counts[sg] == 0) {
            throw DataError(DataError::Kind::invalid,
                            std::string("reweighing: subgroup ") + kSubgroupNames[sg] + " is empty");
        }
    }
    const double n = static_cast<double>(train.size());
    std::array<double, kSubgroups> factors{};
    for (std::size_t sg = 0; sg < kSubgroups; ++sg) {
        const int a = subgroup_sensitive(sg);
        const int y = subgroup_label(sg);
        const double n_a = static_cast<double>(counts[subgroup_index(a, 1)] + counts[subgroup_index(a, 0)]);
        const double n_y = static_cast<double>(counts[subgroup_index(0, y)] + counts[subgroup_index(1, y)]);
        factors[sg] = (n_a * n_y) / (n * static_cast<double>(counts[sg]));
    }
    return factors;
}

std::vector<double> reweighing_weights(const Dataset& train)
{
    const auto factors = reweighing_factors(train);
    std::vector<double> weights(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
        weights[i] = factors[train.subgroup(i)];
    }
    return weights;
}

}  // namespace fairvar
