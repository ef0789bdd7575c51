#include "run_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "hse/errors.hpp"

namespace hse::cli {

namespace {

std::string shortest(double x) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class T>
T number(const std::string& key, const std::string& text) {
    T out{};
    const char* end = text.data() + text.size();
    const auto r = std::from_chars(text.data(), end, out);
    if (r.ec != std::errc{} || r.ptr != end) throw ConfigError(key + ": '" + text + "' is not a valid number");
    return out;
}

bool boolean(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

}  // namespace

RunConfig::RunConfig() {
    const train::TrainConfig t;
    const data::SynthSpec s;
    values_ = {
        {"seed", std::to_string(t.seed)},
        {"epochs", std::to_string(t.epochs)},
        {"batch_size", std::to_string(t.batch_size)},
        {"learning_rate", shortest(t.learning_rate)},
        {"decay_factor", shortest(t.decay_factor)},
        {"decay_every_epochs", std::to_string(t.decay_every_epochs)},
        {"architecture", "hse"},
        {"hidden_low", std::to_string(t.hidden_low)},
        {"hidden_high", std::to_string(t.hidden_high)},
        {"carry_low_state", t.carry_low_state ? "true" : "false"},
        {"alpha", shortest(t.loss.alpha)},
        {"beta", shortest(t.loss.beta)},
        {"gamma", shortest(t.loss.gamma)},
        {"eta", shortest(t.loss.eta)},
        {"beta_prime", shortest(t.loss.beta_prime)},
        {"tau", shortest(t.loss.tau)},
        {"correspondence", "strong"},
        {"sign_mode", "corrected"},
        {"use_low_level", "true"},
        {"pairs", std::to_string(s.num_pairs)},
        {"events", std::to_string(s.num_events)},
        {"clips_min", std::to_string(s.clips_min)},
        {"clips_max", std::to_string(s.clips_max)},
        {"frames_min", std::to_string(s.frames_min)},
        {"frames_max", std::to_string(s.frames_max)},
        {"words_min", std::to_string(s.words_min)},
        {"words_max", std::to_string(s.words_max)},
        {"video_dim", std::to_string(s.video_dim)},
        {"text_dim", std::to_string(s.text_dim)},
        {"latent_dim", std::to_string(s.latent_dim)},
        {"noise_std", shortest(s.noise_std)},
        {"instance_std", shortest(s.instance_std)},
        {"phrase_words", std::to_string(s.phrase_words)},
        {"topk", "1,5,50"},
        {"max_units", "1"},
        {"zeroshot_topk", "5"},
    };
}

void RunConfig::load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    parse(buf.str(), path.string());
}

void RunConfig::parse(std::string_view text, const std::string& origin) {
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
        const std::string key(trim(line.substr(0, eq)));
        try {
            set(key, std::string(trim(line.substr(eq + 1))));
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

void RunConfig::set(const std::string& key, std::string value) {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second = std::move(value);
}

const std::string& RunConfig::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
}

std::string RunConfig::text() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
}

std::uint64_t RunConfig::seed() const { return number<std::uint64_t>("seed", get("seed")); }

data::Correspondence RunConfig::correspondence() const {
    try {
        return data::parse_correspondence(get("correspondence"));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("correspondence: ") + e.what());
    }
}

train::TrainConfig RunConfig::train_config() const {
    auto size = [&](const char* k) { return number<std::size_t>(k, get(k)); };
    auto real = [&](const char* k) { return number<double>(k, get(k)); };
    train::TrainConfig c;
    c.seed = seed();
    c.epochs = size("epochs");
    c.batch_size = size("batch_size");
    c.learning_rate = real("learning_rate");
    c.decay_factor = real("decay_factor");
    c.decay_every_epochs = size("decay_every_epochs");
    c.hidden_low = size("hidden_low");
    c.hidden_high = size("hidden_high");
    c.carry_low_state = boolean("carry_low_state", get("carry_low_state"));
    c.loss.alpha = real("alpha");
    c.loss.beta = real("beta");
    c.loss.gamma = real("gamma");
    c.loss.eta = real("eta");
    c.loss.beta_prime = real("beta_prime");
    c.loss.tau = real("tau");
    c.loss.use_low_level = boolean("use_low_level", get("use_low_level"));
    c.loss.correspondence = correspondence();
    try {
        c.architecture = train::parse_architecture(get("architecture"));
        c.loss.sign_mode = loss::parse_sign_mode(get("sign_mode"));
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    } catch (const ContractError& e) {
        throw ConfigError(e.what());
    }
    return c;
}

data::SynthSpec RunConfig::synth_spec() const {
    auto size = [&](const char* k) { return number<std::size_t>(k, get(k)); };
    auto real = [&](const char* k) { return number<double>(k, get(k)); };
    data::SynthSpec s;
    s.seed = seed();
    s.num_pairs = size("pairs");
    s.num_events = size("events");
    s.clips_min = size("clips_min");
    s.clips_max = size("clips_max");
    s.frames_min = size("frames_min");
    s.frames_max = size("frames_max");
    s.words_min = size("words_min");
    s.words_max = size("words_max");
    s.video_dim = size("video_dim");
    s.text_dim = size("text_dim");
    s.latent_dim = size("latent_dim");
    s.noise_std = real("noise_std");
    s.instance_std = real("instance_std");
    s.phrase_words = size("phrase_words");
    s.correspondence = correspondence();
    try {
        s.validate();
    } catch (const ValidationError& e) {
        throw ConfigError(e.what());
    }
    return s;
}

std::vector<std::size_t> RunConfig::topk() const {
    std::vector<std::size_t> ks;
    std::string_view rest = get("topk");
    while (!rest.empty()) {
        const auto comma = rest.find(',');
        const std::string item(trim(rest.substr(0, comma)));
        const auto k = number<std::size_t>("topk", item);
        if (k == 0) throw ConfigError("topk: k must be >= 1");
        ks.push_back(k);
        rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    }
    if (ks.empty()) throw ConfigError("topk: empty list");
    return ks;
}

std::size_t RunConfig::max_units() const {
    const auto n = number<std::size_t>("max_units", get("max_units"));
    if (n == 0) throw ConfigError("max_units must be >= 1");
    return n;
}

std::size_t RunConfig::zeroshot_topk() const {
    const auto n = number<std::size_t>("zeroshot_topk", get("zeroshot_topk"));
    if (n == 0) throw ConfigError("zeroshot_topk must be >= 1");
    return n;
}

}  // namespace hse::cli
