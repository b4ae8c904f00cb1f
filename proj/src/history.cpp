#include "posg/history.hpp"

#include <cstdlib>

namespace posg {

int HistoryPool::child(int parent, int u, int z) {
    std::uint64_t k = key(parent, u, z);
    auto it = index_.find(k);
    if (it != index_.end()) return it->second;
    int id = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{parent, u, z, nodes_[parent].stage + 1});
    index_.emplace(k, id);
    return id;
}

int HistoryPool::find_child(int parent, int u, int z) const {
    auto it = index_.find(key(parent, u, z));
    return it == index_.end() ? -1 : it->second;
}

std::string HistoryPool::render(int h) const {
    if (h == kEmpty) return "";
    std::string tail = "u" + std::to_string(nodes_[h].control) + "z" +
                       std::to_string(nodes_[h].observation);
    std::string head = render(nodes_[h].parent);
    return head.empty() ? tail : head + "." + tail;
}

int HistoryPool::intern_path(const std::string& path) {
    int h = kEmpty;
    std::size_t pos = 0;
    while (pos < path.size()) {
        std::size_t end = path.find('.', pos);
        if (end == std::string::npos) end = path.size();
        std::string step = path.substr(pos, end - pos);
        std::size_t zpos = step.find('z');
        if (step.empty() || step[0] != 'u' || zpos == std::string::npos)
            throw std::invalid_argument("malformed history path: " + path);
        int u = std::atoi(step.substr(1, zpos - 1).c_str());
        int z = std::atoi(step.substr(zpos + 1).c_str());
        h = child(h, u, z);
        pos = end + 1;
    }
    return h;
}

} // namespace posg
