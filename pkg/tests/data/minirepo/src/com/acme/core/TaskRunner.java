package com.acme.core;

import com.acme.util.Clock;
import com.acme.util.StringUtil;

public class TaskRunner extends BaseTask {
    private Clock clock;
    private boolean verbose;

    public void runAll(int count) {
        long started = clock.millis();
        for (int i = 0; i < count; i++) {
            runOnce(i);
        }
        report(StringUtil.quote("done"), started);
    }

    public void runOnce(int index) {
        String label = describe();
        report(label, index);
    }

    public Clock clockHandle() {
        return clock;
    }

    private void report(String message, long detail) {
        System.out.println(message + ":" + detail);
    }
}
