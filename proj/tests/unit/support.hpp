#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "xprobe/fact_store.hpp"

namespace testing {

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("xprobe-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline xprobe::Fact make_fact(std::string id, std::string relation,
                              std::map<std::string, std::string> subjects,
                              std::map<std::string, std::string> objects) {
  xprobe::Fact f;
  f.id = std::move(id);
  f.relation = std::move(relation);
  f.subjects = std::move(subjects);
  f.objects = std::move(objects);
  return f;
}

/// Six capital facts in eng/jpn/fra; c5 lacks its French object.
inline xprobe::FactStore capitals() {
  using xprobe::PromptTemplate;
  std::vector<xprobe::Fact> facts{
      make_fact("c0", "capital", {{"eng_Latn", "France"}, {"jpn_Jpan", "フランス"}, {"fra_Latn", "France"}},
                {{"eng_Latn", "Paris"}, {"jpn_Jpan", "パリ"}, {"fra_Latn", "Paris"}}),
      make_fact("c1", "capital", {{"eng_Latn", "Serbia"}, {"jpn_Jpan", "セルビア"}, {"fra_Latn", "Serbie"}},
                {{"eng_Latn", "Belgrade"}, {"jpn_Jpan", "ベオグラード"}, {"fra_Latn", "Belgrade"}}),
      make_fact("c2", "capital", {{"eng_Latn", "Italy"}, {"jpn_Jpan", "イタリア"}, {"fra_Latn", "Italie"}},
                {{"eng_Latn", "Rome"}, {"jpn_Jpan", "ローマ"}, {"fra_Latn", "Rome"}}),
      make_fact("c3", "capital", {{"eng_Latn", "United Kingdom"}, {"jpn_Jpan", "イギリス"}, {"fra_Latn", "Royaume-Uni"}},
                {{"eng_Latn", "London"}, {"jpn_Jpan", "ロンドン"}, {"fra_Latn", "Londres"}}),
      make_fact("c4", "capital", {{"eng_Latn", "Japan"}, {"jpn_Jpan", "日本"}, {"fra_Latn", "Japon"}},
                {{"eng_Latn", "Tokyo"}, {"jpn_Jpan", "東京"}, {"fra_Latn", "Tokyo"}}),
      make_fact("c5", "capital", {{"eng_Latn", "Peru"}, {"jpn_Jpan", "ペルー"}, {"fra_Latn", "Pérou"}},
                {{"eng_Latn", "Lima"}, {"jpn_Jpan", "リマ"}}),
  };
  std::vector<PromptTemplate> templates{
      {"capital", "eng_Latn", "Where is {subject}'s capital located? The answer is:"},
      {"capital", "jpn_Jpan", "{subject}の首都はどこにありますか？答えは："},
      {"capital", "fra_Latn", "Où se trouve la capitale de {subject} ? La réponse est :"},
  };
  return xprobe::FactStore({"eng_Latn", "jpn_Jpan", "fra_Latn"}, std::move(facts), std::move(templates));
}

}  // namespace testing
