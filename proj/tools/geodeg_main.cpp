#include <cstdio>

int main() {
    std::puts("geodeg: CLI not wired up yet");
    return 2;
}
