# -*- coding: utf-8 -*-
"""
Purpose: collects counts and timing for a crawl, and reports them
"""

import time
import typing

from boardcrawl import fancy_logger


class CrawlStats:
    """
    Purpose: collects counts and timing statistics for one crawl.

    Every dequeued page URL ends up counted exactly once, either in
    pages_fetched or in fetch_errors.
    """

    def __init__(self, fn_now: typing.Callable[[], float] = time.monotonic):
        self.fn_now = fn_now
        self.start_time = fn_now()
        self.end_time: typing.Optional[float] = None

        self.pages_fetched = 0
        self.fetch_errors = 0
        self.non_html_skips = 0
        self.robots_refusals = 0
        self.attachments_found = 0
        self.attachment_payloads_fetched = 0
        self.attachment_fetch_errors = 0
        self.links_discarded = 0

    def log_page_fetched(self) -> None:
        self.pages_fetched += 1

    def log_page_failure(self, non_html: bool = False, robots: bool = False) -> None:
        """
        Call this once for each dequeued page that didn't make it
        into the crawl result.
        """
        self.fetch_errors += 1
        if non_html:
            self.non_html_skips += 1
        if robots:
            self.robots_refusals += 1

    def log_attachment_found(self) -> None:
        self.attachments_found += 1

    def log_attachment_payload(self, success: bool) -> None:
        if success:
            self.attachment_payloads_fetched += 1
        else:
            self.attachment_fetch_errors += 1

    def log_link_discarded(self) -> None:
        self.links_discarded += 1

    def finish(self) -> None:
        self.end_time = self.fn_now()

    @property
    def dequeued(self) -> int:
        return self.pages_fetched + self.fetch_errors

    def duration(self) -> float:
        end_time = self.end_time if self.end_time is not None else self.fn_now()
        return end_time - self.start_time

    def pages_per_second(self) -> float:
        """
        Returns the rate at which pages were fetched, in pages per second.
        """
        duration = self.duration()
        if not duration:
            return 0.0
        return self.pages_fetched / duration

    def error_rate(self) -> float:
        """
        Returns the percentage of dequeued pages that failed.
        """
        if 0 == self.dequeued:
            return 0.0
        return 100 * self.fetch_errors / self.dequeued

    def as_dict(self) -> typing.Dict[str, int]:
        return {
            "pages_fetched": self.pages_fetched,
            "fetch_errors": self.fetch_errors,
            "non_html_skips": self.non_html_skips,
            "robots_refusals": self.robots_refusals,
            "attachments_found": self.attachments_found,
            "attachment_payloads_fetched": self.attachment_payloads_fetched,
            "attachment_fetch_errors": self.attachment_fetch_errors,
            "links_discarded": self.links_discarded,
        }

    def summary_lines(self) -> typing.List[str]:
        """
        Human-readable summary, one counter per line.
        """
        lines = [
            f"pages fetched:       {self.pages_fetched}",
            f"fetch errors:        {self.fetch_errors}",
            f"attachments found:   {self.attachments_found}",
            f"payloads fetched:    {self.attachment_payloads_fetched}",
            f"links discarded:     {self.links_discarded}",
            f"elapsed:             {self.duration():.2f}s",
        ]
        if self.attachment_fetch_errors:
            lines.insert(4, f"payload errors:      {self.attachment_fetch_errors}")
        return lines

    def write_stat_summary_to_log(self) -> None:
        """
        This writes a summary of the statistics to the log.
        Call this after the crawl has finished.
        """
        if 0 == self.dequeued:
            fancy_logger.get().info("No pages crawled")
            return

        fancy_logger.get().info(
            f"Crawled {self.pages_fetched} page(s) with "
            + f"{self.attachments_found} attachment(s), "
            + f"failed to fetch {self.fetch_errors} page(s)"
        )

        if self.fetch_errors > 0:
            fancy_logger.get().warning(
                "Page error rate:             %0.2f%%", self.error_rate()
            )
            if self.non_html_skips:
                fancy_logger.get().warning(
                    "Skipped as non-HTML:         %d", self.non_html_skips
                )
            if self.robots_refusals:
                fancy_logger.get().warning(
                    "Refused by robots.txt:       %d", self.robots_refusals
                )
        if self.attachment_fetch_errors > 0:
            fancy_logger.get().warning(
                "Attachment payload failures: %d", self.attachment_fetch_errors
            )

        fancy_logger.get().debug(
            "Links discarded:             %d", self.links_discarded
        )
        fancy_logger.get().debug(
            "Pages per second:            %6.2f", self.pages_per_second()
        )
