#include "fixtures.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "exclaim/error.hpp"

namespace exclaim::testing {

namespace fs = std::filesystem;
using nlohmann::json;

TempDir::TempDir() {
    std::string pattern = (fs::temp_directory_path() / "exclaim-test-XXXXXX").string();
    if (!mkdtemp(pattern.data())) throw std::runtime_error("mkdtemp failed");
    path_ = pattern;
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

HttpResponse FakeHttpClient::post(const std::string& url, const std::string& body, const HttpHeaders& headers) {
    ++calls_;
    {
        std::lock_guard lock(mutex_);
        bodies_.push_back(body);
        headers_.push_back(headers);
    }
    return handler_(url, body);
}

std::vector<std::string> FakeHttpClient::bodies() const {
    std::lock_guard lock(mutex_);
    return bodies_;
}

std::vector<HttpHeaders> FakeHttpClient::headers() const {
    std::lock_guard lock(mutex_);
    return headers_;
}

std::shared_ptr<FakeHttpClient> down_client() {
    return std::make_shared<FakeHttpClient>([](const std::string& url, const std::string&) -> HttpResponse {
        fail(ErrorKind::ProviderUnavailable, "connection refused: " + url);
    });
}

HttpResponse json_reply(const json& body, int status) { return {status, body.dump()}; }

TextualEntity span_of(const std::string& caption, const std::string& surface, const std::string& id,
                      const std::string& ner) {
    const auto pos = caption.find(surface);
    if (pos == std::string::npos) throw std::logic_error("'" + surface + "' not in caption");
    return {id, surface, pos, pos + surface.size(), ner};
}

VisualEntity visual(const std::string& id, const std::string& label, double confidence) {
    return {id, label, {10, 20, 64, 48}, "crop://" + id, confidence};
}

corpus::NewsItem make_item(const std::string& id, const std::string& caption, std::optional<corpus::Label> label,
                           std::optional<corpus::Category> category) {
    corpus::NewsItem item;
    item.id = id;
    item.image_ref = "images/" + id + ".jpg";
    item.caption = caption;
    item.label = label;
    item.category = category;
    return item;
}

namespace {

struct Person {
    const char* name;
    const char* visual_label;
};

const Person k_people[] = {{"Angela Merkel", "merkel"},     {"Marco Rubio", "rubio"},
                           {"Pope Francis", "pope"},        {"Serena Williams", "serena"},
                           {"Elon Musk", "musk"},           {"Jacinda Ardern", "ardern"},
                           {"Lionel Messi", "messi"}};
const char* const k_events[] = {"speaks at a rally", "visits a flooded village", "opens a new hospital",
                                "meets local students", "attends a state dinner"};
const char* const k_places[] = {"Berlin",  "Minneapolis", "Ciudad Juarez", "Buenos Aires", "Nairobi", "Osaka",
                                "Lisbon", "Toronto",     "Cape Town",     "Mumbai",       "Auckland"};

std::string lower_first_word(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == ' ') break;
        out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

bool falsified(const corpus::NewsItem& item) { return item.label == corpus::Label::Falsified; }

}  // namespace

std::vector<corpus::NewsItem> newsroom_corpus(std::size_t n) {
    std::vector<corpus::NewsItem> items;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& person = k_people[i % std::size(k_people)];
        const std::string place = k_places[i % std::size(k_places)];
        const std::string caption =
            std::string(person.name) + " " + k_events[i % std::size(k_events)] + " in " + place + ".";
        char id[32];
        std::snprintf(id, sizeof id, "n%03zu", i);
        auto item = make_item(id, caption, i % 2 == 0 ? corpus::Label::Falsified : corpus::Label::Pristine,
                              corpus::k_all_categories[i % 4]);
        PreExtraction pre;
        pre.visual_entities = {visual(std::string(id) + "-v0", person.visual_label, 0.95),
                               visual(std::string(id) + "-v1", lower_first_word(place) + " skyline", 0.8),
                               visual(std::string(id) + "-v2", "crowd", 0.7)};
        pre.textual_entities = {span_of(caption, person.name, "t0", "PERSON"), span_of(caption, place, "t1", "GPE")};
        item.pre_extracted = pre;
        items.push_back(std::move(item));
    }
    return items;
}

std::vector<corpus::NewsItem> ciudad_juarez_corpus() {
    using corpus::Label;
    const std::string query =
        "Crowds cheer and snap photos as the pope arrives for a meeting with World of Work representatives in "
        "Ciudad Juarez.";
    const std::string related = "The pope smiles while World of Work members wave to him in Ciudad Juarez.";

    auto q = make_item(k_case_id, query, Label::Falsified, corpus::Category::SceneMatching);
    PreExtraction qpre;
    qpre.visual_entities = {visual("cj-query-v0", "crowd", 0.92), visual("cj-query-v1", "cell phone", 0.81),
                            visual("cj-query-v2", "hallway", 0.64)};
    qpre.textual_entities = {span_of(query, "World of Work", "t0", "ORG"),
                             span_of(query, "Ciudad Juarez", "t1", "GPE")};
    q.pre_extracted = qpre;

    auto r = make_item("cj-related", related, Label::Pristine, corpus::Category::SceneMatching);
    PreExtraction rpre;
    rpre.visual_entities = {visual("cj-related-v0", "pope", 0.97), visual("cj-related-v1", "crowd", 0.88)};
    rpre.textual_entities = {span_of(related, "World of Work", "t0", "ORG"),
                             span_of(related, "Ciudad Juarez", "t1", "GPE")};
    r.pre_extracted = rpre;

    std::vector<corpus::NewsItem> items = {q, r};
    items.push_back(make_item("cj-farm", "Farmers harvest wheat near Kansas City during a summer heat wave.",
                              Label::Pristine, corpus::Category::TextImage));
    items.push_back(make_item("cj-sail", "Sailboats race off the coast of Auckland on a windy Sunday.",
                              Label::Pristine, corpus::Category::TextText));
    items.push_back(make_item("cj-court", "Lawyers leave the supreme court building after hearing arguments in Ottawa.",
                              Label::Pristine, corpus::Category::PersonMatching));
    return items;
}

std::map<llm::ScriptedMockProvider::Key, std::string> case_study_script() {
    return {
        {{"retrieval", k_case_id},
         "The nearest stored report has the pope greeting World of Work members in Ciudad Juarez, so the "
         "geographic context of the caption holds up.\n"
         "FLAGS:\n"
         "- person discrepancy: the pope named in the caption is not visible; the photo shows an anonymous crowd "
         "raising phones\n"
         "- event discrepancy: nothing in the picture ties the scene to a World of Work meeting\n"},
        {{"detective", k_case_id},
         "Following up on the retrieval flags.\n"
         "ELEMENT time: unknown - no date cues in the photo\n"
         "ELEMENT place: consistent - the evidence confirms the geographic context of Ciudad Juarez\n"
         "ELEMENT person: contradicted - the pope is absent; only unidentified people with phones and a group in a "
         "corridor\n"
         "ELEMENT event: contradicted - no sign of a meeting with World of Work representatives\n"
         "ELEMENT object: unknown - raised phones fit many kinds of gathering\n"},
        {{"analyst", k_case_id},
         "The photo shows people holding up phones and a group walking along a corridor, with no identifiable "
         "faces. A related report confirms the geographic context: the pope did meet World of Work members in "
         "Ciudad Juarez. The person and the event the caption names are missing from the image, and that "
         "discrepancy means the caption misrepresents the picture.\n"
         "VERDICT: OOC\n"},
    };
}

std::map<llm::ScriptedMockProvider::Key, std::string> newsroom_script(const std::vector<corpus::NewsItem>& items) {
    std::map<llm::ScriptedMockProvider::Key, std::string> script;
    for (const auto& item : items) {
        const bool ooc = falsified(item);
        script[{"retrieval", item.id}] = ooc ? "The closest reports describe a different setting.\nFLAGS:\n- "
                                               "place in the caption does not match the retrieved events\n"
                                             : "Evidence agrees with the caption.\nFLAGS:\n";
        script[{"detective", item.id}] =
            std::string("ELEMENT time: unknown - no date visible\n") +
            (ooc ? "ELEMENT place: contradicted - the landmarks belong elsewhere\n"
                 : "ELEMENT place: consistent - landmarks match\n") +
            "ELEMENT person: consistent - the named person is visible\n"
            "ELEMENT event: unknown - not enough detail\n"
            "ELEMENT object: unknown - nothing specific\n";
        script[{"analyst", item.id}] = ooc ? "The place named in the caption conflicts with the scene.\nVERDICT: OOC\n"
                                           : "Caption and image agree.\nVERDICT: PRISTINE\n";
    }
    return script;
}

void write_script(const fs::path& path, const std::map<llm::ScriptedMockProvider::Key, std::string>& s) {
    std::ofstream out(path);
    for (const auto& [key, response] : s) {
        out << json{{"stage", key.first}, {"sample", key.second}, {"response", response}}.dump() << '\n';
    }
}

namespace {

constexpr std::size_t k_per_class = 3632;
constexpr std::size_t k_missed = 243;
constexpr std::size_t k_false_alarms = 287;

corpus::Category error_category(std::size_t nth_error) {
    if (nth_error < 177) return corpus::Category::TextImage;
    if (nth_error < 177 + 174) return corpus::Category::PersonMatching;
    if (nth_error < 177 + 174 + 106) return corpus::Category::SceneMatching;
    return corpus::Category::TextText;
}

}  // namespace

std::vector<evaluation::PredictionRecord> synthetic_predictions() {
    std::vector<evaluation::PredictionRecord> preds;
    preds.reserve(2 * k_per_class);
    std::size_t errors = 0;
    for (std::size_t i = 0; i < 2 * k_per_class; ++i) {
        evaluation::PredictionRecord p;
        char id[32];
        std::snprintf(id, sizeof id, "s%04zu", i);
        p.item_id = id;
        const bool is_falsified = i < k_per_class;
        p.truth = is_falsified ? corpus::Label::Falsified : corpus::Label::Pristine;
        const std::size_t j = is_falsified ? i : i - k_per_class;
        const bool wrong = j < (is_falsified ? k_missed : k_false_alarms);
        p.predicted_c_ooc = (is_falsified != wrong) ? 1 : 0;
        p.category = wrong ? error_category(errors++) : corpus::k_all_categories[i % 4];
        preds.push_back(std::move(p));
    }
    return preds;
}

std::vector<corpus::NewsItem> synthetic_corpus() {
    std::vector<corpus::NewsItem> items;
    for (const auto& p : synthetic_predictions()) {
        items.push_back(make_item(p.item_id, "Synthetic report " + p.item_id + " about a local council vote.",
                                  p.truth, p.category));
    }
    return items;
}

std::map<llm::ScriptedMockProvider::Key, std::string> synthetic_script(
    const std::vector<corpus::NewsItem>& items, const std::vector<evaluation::PredictionRecord>& preds) {
    std::map<llm::ScriptedMockProvider::Key, std::string> script;
    for (std::size_t i = 0; i < items.size(); ++i) {
        script[{"analyst", items[i].id}] =
            preds[i].predicted_c_ooc ? "Scripted decision.\nVERDICT: OOC\n" : "Scripted decision.\nVERDICT: PRISTINE\n";
    }
    return script;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace exclaim::testing
