#pragma once

// JSON and CSV serialization of traces, kernels, channels and reports.
// Doubles are written with 17 significant digits; infinities as the strings
// "-inf" and "inf". Keys keep insertion order so output is byte-stable.

#include "treedet/analysis.hpp"
#include "treedet/engine.hpp"
#include "treedet/search.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace treedet::io {

using Json = nlohmann::ordered_json;

// Serializes with two-space indentation and a trailing newline.
std::string dump(const Json& value);
Json parse(const std::string& text);

double number(const Json& value);  // accepts "-inf", "inf"

Json probability_to_json(const Probability& p);
Probability probability_from_json(const Json& value);

Json alphabet_to_json(const MessageAlphabet& alphabet);
MessageAlphabet alphabet_from_json(const Json& value);

Json channel_to_json(const ChannelSpec& channel);
ChannelSpec channel_from_json(const Json& value);

Json kernel_to_json(const StochasticKernel& kernel);
KernelPtr kernel_from_json(const Json& value);

Json level_to_json(const LevelDistribution& level);
LevelDistribution level_from_json(const Json& value);

Json trace_to_json(const RunTrace& trace);
RunTrace trace_from_json(const Json& value);

// One row per (level, letter) with both hypotheses; natural log.
std::string trace_to_csv(const RunTrace& trace);

Json graph_to_json(const DependenceGraph& graph, const MessageAlphabet& alphabet);
Json assumptions_to_json(const AssumptionReport& report, const MessageAlphabet& alphabet);
Json bounds_to_json(const BoundsReport& report);
Json lemma4_to_json(const Lemma4Result& result);
std::string lemma4_to_csv(const Lemma4Result& result);
Json theorem3_to_json(const Theorem3Result& result);
Json lemma6_to_json(const Lemma6Result& result);
Json fit_to_json(const ExponentFit& fit, std::span<const SeriesPoint> series);
Json mc_to_json(const MonteCarloEstimate& estimate);

Json assignment_to_json(const NodeDependentAssignment& assignment);
Json exponents_to_json(std::span<const NodeExponent> exponents);
Json lemma2_to_json(const Lemma2Report& report);
Json lemma3_to_json(const Lemma3Report& report);
Json ordering_to_json(std::span<const OrderingRow> rows);
Json search_to_json(const SearchResult& result);

// Minimal CSV: comment lines start with '#', fields never contain commas.
struct CsvTable {
  std::vector<std::string> comments;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
std::string format_csv(const CsvTable& table);
CsvTable parse_csv(const std::string& text);
std::string format_double(double value);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace treedet::io
