#ifndef TRACKDIFF_TESTS_SUPPORT_TEST_UTIL_HPP_
#define TRACKDIFF_TESTS_SUPPORT_TEST_UTIL_HPP_

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>

namespace trackdiff::testsupport {

namespace fs = std::filesystem;

// Unique scratch directory under the system temp root, removed on scope exit.
class ScratchDir {
public:
    explicit ScratchDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                ("trackdiff-" + tag + "-" + std::to_string(::getpid()) + "-" +
                 std::to_string(counter.fetch_add(1)));
        fs::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    fs::path path_;
};

inline void write_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path);
    out << content;
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace trackdiff::testsupport

#endif  // TRACKDIFF_TESTS_SUPPORT_TEST_UTIL_HPP_
